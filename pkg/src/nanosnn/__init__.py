"""Simulator and compiler for superconducting-nanowire spiking neural networks."""

from .circuit import (NEURON_FORMS, NanowireParams, NeuronParams, NeuronState, SynapseParams,
                      SynapseState, kinetic_inductance, neuron_rhs, synapse_rhs, update_switch)
from .drives import InputDrive
from .errors import (ChatterError, ConfigurationError, DivergenceError, DocumentError,
                     RealizabilityError, ValidationError)
from .integrator import (BACKEND, IntegratorConfig, SimulationTrace, run_network, simulate,
                         simulate_fixed_step_oracle)
from .network import AssembledNetwork, NetworkGraph, assemble, quiescent_state
from .translator import (CompositionalSpec, GateHardware, HardwareDefaults, LifSpec,
                         check_realizability, from_compositional, from_lif, gate_probability,
                         gate_weight, lambda_from_hardware)
from .analysis import firing_rates, late_rates, lsq_error
from .apps import GateSpec, LinearProblem, evaluate_gate, solve_linear
from .documents import parse_network_document, serialize_document

__version__ = "0.1.0"

__all__ = [
    "NEURON_FORMS", "NanowireParams", "NeuronParams", "NeuronState", "SynapseParams",
    "SynapseState", "kinetic_inductance", "neuron_rhs", "synapse_rhs", "update_switch",
    "InputDrive", "ChatterError", "ConfigurationError", "DivergenceError", "DocumentError",
    "RealizabilityError", "ValidationError", "BACKEND", "IntegratorConfig", "SimulationTrace",
    "run_network", "simulate", "simulate_fixed_step_oracle", "AssembledNetwork",
    "NetworkGraph", "assemble", "quiescent_state", "CompositionalSpec", "GateHardware",
    "HardwareDefaults", "LifSpec", "check_realizability", "from_compositional", "from_lif",
    "gate_probability", "gate_weight", "lambda_from_hardware", "firing_rates", "late_rates",
    "lsq_error", "GateSpec", "LinearProblem", "evaluate_gate", "solve_linear",
    "parse_network_document", "serialize_document",
]
