"""Compile algorithmic neuron models into circuit parameters.

LIF mapping: the leak rate sets the synapse loop inductance, the initial
potential sets the neuron bias relative to I_c, weights set the hTron bias
currents, and external inputs become input-current ramps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .circuit import NanowireParams, NeuronParams, SynapseParams
from .drives import InputDrive
from .errors import ConfigurationError, RealizabilityError
from .network import NetworkGraph


@dataclass(frozen=True)
class HardwareDefaults:
    # neuron
    L_nw: float = 10.0
    L1: float = 20.0
    L2: float = 20.0
    R1: float = 5.0
    R2: float = 5.0
    I_c: float = 30.0
    R_hs: float = 100.0
    retrap_fraction: float = 0.5
    # synapse
    L_nw_h: float = 100.0
    R_syn1: float = 10.0
    R_syn2: float = 10.0
    R_out: float = 5.0
    L_out: float = 20.0
    beta: float = 0.5
    htron_ic_margin: float = 1.1
    htron_retrap_fraction: float = 0.9
    htron_ic_max: float | None = None      # uA; None = unlimited
    # LIF scaling
    synapse_gain: float = 1400.0           # I_bias_h per unit (alpha * C * headroom)
    input_unit: float = 0.085              # uA; ramp rate per unit input is input_unit / T
    timescale: float = 37.0                # ns, the neuron timescale T
    negative_ramp_cap: float | None = None  # uA; magnitude limit of inhibitory ramps

    def __post_init__(self):
        for k in ("L_nw", "L1", "L2", "R1", "R2", "I_c", "R_hs", "L_nw_h", "R_syn1",
                  "R_syn2", "R_out", "L_out", "synapse_gain", "input_unit", "timescale"):
            if not getattr(self, k) > 0:
                raise ConfigurationError(f"hardware default {k} must be positive")

    def neuron(self, I_bias: float, I_c: float | None = None) -> NeuronParams:
        ic = self.I_c if I_c is None else I_c
        nw = NanowireParams(self.L_nw, ic, self.retrap_fraction * ic, self.R_hs)
        return NeuronParams(nw, nw, self.L1, self.L2, self.R1, self.R2, I_bias)

    def synapse(self, I_bias_h: float, L_syn: float) -> SynapseParams:
        ic = max(self.htron_ic_margin * abs(I_bias_h), 1.0)
        if self.htron_ic_max is not None:
            ic = min(ic, self.htron_ic_max)
            if abs(I_bias_h) >= ic:
                raise RealizabilityError(
                    f"synapse bias {abs(I_bias_h):.4g} uA needs a channel critical "
                    f"current above the {self.htron_ic_max:.4g} uA limit")
        ch = NanowireParams(self.L_nw_h, ic, self.htron_retrap_fraction * ic, self.R_hs)
        return SynapseParams(ch, L_syn, self.R_syn1, self.R_syn2, self.R_out, self.L_out,
                             I_bias_h, self.beta)

    def bias_for_quiescent_main(self, i_main: float) -> float:
        return i_main * (self.L1 + self.L2) / self.L1

    def L_syn_for(self, lam: float) -> float:
        return (self.L_nw / self.R2) * self.R_syn1 / lam


def lambda_from_hardware(n: NeuronParams, s: SynapseParams) -> float:
    """Leak rate implied by a neuron/synapse pair."""
    return (n.nw2.L0 / n.R2) / (s.L_syn / s.R_syn1)


@dataclass
class LifSpec:
    C: np.ndarray
    I: list                      # per neuron: float (constant input) or InputDrive
    lam: float = 0.02
    alpha: float = 0.67
    u0: float = 0.95             # fraction of eta
    eta: float = 1.0
    ids: list | None = None

    def __post_init__(self):
        self.C = np.atleast_2d(np.asarray(self.C, float))
        n = self.C.shape[0]
        if self.C.shape != (n, n):
            raise ConfigurationError("C must be square")
        if len(self.I) != n:
            raise ConfigurationError(f"I has {len(self.I)} entries for {n} neurons")
        if not self.lam > 0:
            raise ConfigurationError("lambda must be positive")
        if not 0 <= self.u0 < self.eta:
            raise ConfigurationError("need 0 <= u0 < eta")
        if self.ids is None:
            self.ids = [f"n{k + 1}" for k in range(n)]

    @property
    def n(self) -> int:
        return self.C.shape[0]


def ramp_rate(value: float, hw: HardwareDefaults) -> float:
    return value * hw.input_unit / hw.timescale


def _lif_drive(value, hw: HardwareDefaults) -> InputDrive:
    if isinstance(value, InputDrive):
        return value
    r = ramp_rate(float(value), hw)
    if r < 0 and hw.negative_ramp_cap is not None:
        return InputDrive.ramp(r, cap=hw.negative_ramp_cap)
    return InputDrive.ramp(r)


def from_lif(spec: LifSpec, hw: HardwareDefaults = HardwareDefaults()) -> NetworkGraph:
    if not spec.lam > 0:
        raise ConfigurationError("lambda must be positive")
    frac = spec.u0 / spec.eta
    neuron = hw.neuron(hw.bias_for_quiescent_main(frac * hw.I_c))
    headroom = hw.I_c * (1.0 - frac)
    L_syn = hw.L_syn_for(spec.lam)
    g = NetworkGraph()
    for k, nid in enumerate(spec.ids):
        g.add_neuron(nid, neuron, _lif_drive(spec.I[k], hw))
    # C_ij couples the spikes of j into neuron i; C > 0 inhibits.
    for i in range(spec.n):
        for j in range(spec.n):
            c = spec.C[i, j]
            if c == 0:
                continue
            ibh = -c * spec.alpha * headroom * hw.synapse_gain
            g.add_synapse(spec.ids[j], spec.ids[i], hw.synapse(ibh, L_syn))
    return g


# compositional model ----------------------------------------------------

@dataclass
class CompositionalSpec:
    b: dict                      # node -> bias
    w: dict                      # (source, target) -> weight
    temperature: float = 1.0
    inputs: tuple = ()           # externally driven nodes

    def __post_init__(self):
        if not self.temperature > 0:
            raise ConfigurationError("temperature must be positive")
        bad = [e for e in self.w if e[0] not in self.b or e[1] not in self.b]
        if bad:
            raise ConfigurationError(f"weights on undeclared edges: {bad}")
        if not self.inputs:
            targets = {e[1] for e in self.w}
            self.inputs = tuple(u for u in self.b if u not in targets)


@dataclass(frozen=True)
class GateHardware:
    """Operating point of the gate construction.  One unit of compositional
    weight is a synapse biased at `synapse_bias`; `level` is the synaptic
    current that unit delivers when its source fires at the reference drive."""
    synapse_bias: float = 27.0     # uA
    input_bias: float = 58.0       # uA
    level: float = 2.16            # uA per unit weight
    weight_unit: float = 1.0
    L_syn: float = 1000.0          # nH


def from_compositional(spec: CompositionalSpec, hw: HardwareDefaults = HardwareDefaults(),
                       gate: GateHardware = GateHardware()) -> NetworkGraph:
    """Firing threshold of a neuron, referred to its input, is
    I_c (L1 + L2) / L1 - I_bias; a bias b(u) places it b(u) weight units
    (each worth `gate.level`) above the quiescent point."""
    g = NetworkGraph()
    threshold_bias = hw.bias_for_quiescent_main(hw.I_c)
    for u, bu in spec.b.items():
        if u in spec.inputs:
            bias = gate.input_bias
        else:
            bias = threshold_bias - (bu / gate.weight_unit) * gate.level
        g.add_neuron(u, hw.neuron(round(bias, 9)))
    for (u, v), w in spec.w.items():
        g.add_synapse(u, v, hw.synapse(w / gate.weight_unit * gate.synapse_bias, gate.L_syn))
    return g


def gate_weight(delta: float) -> float:
    if not 0 < delta < 0.5:
        raise ConfigurationError("delta must lie in (0, 0.5)")
    return 2.0 * math.log((1.0 - delta) / delta)


def gate_probability(n_firing: int, L: float, b: float, n_inputs: int | None = None,
                     temperature: float = 1.0) -> float:
    """Firing probability of a threshold node with n_firing active inputs."""
    if n_inputs is not None and not 0 <= n_firing <= n_inputs:
        raise ConfigurationError("n_firing must lie in [0, n_inputs]")
    pot = n_firing * L - b
    return 1.0 / (1.0 + math.exp(-pot / temperature))


# realizability ------------------------------------------------------------

SHEET_INDUCTANCE = {"NbN": 33.0, "WSi": 260.0}   # pH per square


@dataclass(frozen=True)
class RealizabilityLimits:
    sheet_inductance: dict = field(default_factory=lambda: dict(SHEET_INDUCTANCE))
    max_critical_current: float = 5000.0   # uA
    min_resistance: float = 0.1            # Ohm


@dataclass
class RealizabilityReport:
    squares: dict            # material -> worst-case squares for the largest L_syn
    violations: list
    max_L_syn: float = 0.0

    @property
    def ok(self) -> bool:
        return not self.violations


def check_realizability(g: NetworkGraph, limits: RealizabilityLimits = RealizabilityLimits()
                        ) -> RealizabilityReport:
    viol = []
    max_L = 0.0
    for k, e in enumerate(g.synapses):
        p = e.params
        max_L = max(max_L, p.L_syn)
        ic = p.htron_channel.I_c
        if abs(p.I_bias_h) >= ic:
            viol.append(f"synapse {k}: |I_bias_h|={abs(p.I_bias_h):.4g} uA >= I_c,h={ic:.4g} uA")
        if ic > limits.max_critical_current:
            viol.append(f"synapse {k}: I_c,h={ic:.4g} uA above limit")
        for name in ("R_syn1", "R_syn2", "R_out"):
            if getattr(p, name) < limits.min_resistance:
                viol.append(f"synapse {k}: {name} below minimum resistance")
    for n in g.neurons:
        p = n.params
        for name, nw in (("control", p.nw1), ("main", p.nw2)):
            if nw.I_c > limits.max_critical_current:
                viol.append(f"neuron {n.id}: {name} nanowire I_c={nw.I_c:.4g} uA above limit")
        if min(p.R1, p.R2) < limits.min_resistance:
            viol.append(f"neuron {n.id}: shunt resistance below minimum")
    squares = {m: max_L * 1000.0 / s for m, s in limits.sheet_inductance.items()}
    return RealizabilityReport(squares, viol, max_L)
