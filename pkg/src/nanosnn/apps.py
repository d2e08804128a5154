"""Linear-system solving by firing rates and Boolean threshold gates."""

from __future__ import annotations

import itertools
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .analysis import (calibrate_scale, firing_rates, late_rates, lsq_error)
from .circuit import NeuronParams, SynapseParams
from .drives import InputDrive
from .errors import ConfigurationError
from .integrator import IntegratorConfig, SimulationTrace, run_network
from .network import NetworkGraph
from .translator import (CompositionalSpec, GateHardware, HardwareDefaults, LifSpec,
                         from_compositional, from_lif, gate_weight)


@dataclass
class LinearProblem:
    A: np.ndarray
    b: np.ndarray
    psd_hint: str = "already-psd"    # or "normalize"

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, float))
        self.b = np.asarray(self.b, float).ravel()
        n = self.A.shape[0]
        if self.A.shape != (n, n) or self.b.shape != (n,):
            raise ConfigurationError(f"A is {self.A.shape}, b has {self.b.shape[0]} entries")
        if self.psd_hint not in ("already-psd", "normalize"):
            raise ConfigurationError(f"unknown psd_hint {self.psd_hint!r}")

    def system(self) -> tuple[np.ndarray, np.ndarray]:
        """Matrix and right-hand side actually mapped onto the network."""
        if self.psd_hint == "normalize":
            return self.A.T @ self.A, self.A.T @ self.b
        return self.A, self.b

    def is_psd(self, tol: float = 1e-12) -> bool:
        M = self.A
        if not np.allclose(M, M.T):
            return False
        return bool(np.linalg.eigvalsh(M).min() >= -tol)


@dataclass
class SolveResult:
    x_hat: np.ndarray             # scale-calibrated solution from cumulative rates
    rates: np.ndarray             # cumulative rates N(t_end)/t_end (1/ns)
    late_rates: np.ndarray        # rates over the last half of the horizon
    rate_ratios: np.ndarray       # late rates divided by the largest late rate
    scale: float                  # calibration constant of x_hat
    error_times: np.ndarray
    error_trace: np.ndarray | None
    activation_time: float | None  # first spike of the last neuron to start firing
    trace: SimulationTrace
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "x_hat": self.x_hat.tolist(), "rates_per_ns": self.rates.tolist(),
            "late_rates_per_ns": self.late_rates.tolist(),
            "rate_ratios": self.rate_ratios.tolist(), "scale": self.scale,
            "error_times_ns": self.error_times.tolist(),
            "error_trace": None if self.error_trace is None else self.error_trace.tolist(),
            "activation_time_ns": self.activation_time,
            "spike_counts": {k: int(v) for k, v in self.trace.spike_counts().items()},
            "calibration": self.meta,
        }


def solver_network(p: LinearProblem, hw: HardwareDefaults = HardwareDefaults(),
                   lam: float = 0.02, alpha: float = 0.67, u0: float = 0.95,
                   eta: float = 1.0) -> NetworkGraph:
    M, rhs = p.system()
    return from_lif(LifSpec(M, list(rhs), lam=lam, alpha=alpha, u0=u0, eta=eta), hw)


def solve_linear(p: LinearProblem, hw: HardwareDefaults = HardwareDefaults(),
                 cfg: IntegratorConfig | None = None, lam: float = 0.02,
                 alpha: float = 0.67, u0: float = 0.95, eta: float = 1.0,
                 horizon: float = 200.0, sample_dt: float | None = None,
                 neuron_form: str = "kcl", oracle_dt: float | None = None) -> SolveResult:
    """Map Ax = b onto an LIF network, simulate for `horizon` neuron
    timescales and read the solution from the firing rates."""
    if p.psd_hint != "normalize" and not p.is_psd():
        warnings.warn("matrix is not symmetric positive semidefinite; consider "
                      "psd_hint='normalize'", RuntimeWarning, stacklevel=2)
    M, rhs = p.system()
    T = hw.timescale
    t_end = horizon * T
    cfg = replace(cfg or IntegratorConfig(), t_end=t_end,
                  record_dt=(cfg.record_dt if cfg and cfg.record_dt else T / 4))
    g = solver_network(p, hw, lam, alpha, u0, eta)
    tr = run_network(g, cfg, neuron_form, oracle_dt)
    sample_dt = sample_dt or T
    rs = firing_rates(tr, sample_dt, t_end, timescale=T)
    r_end = rs.rates[-1]
    late = late_rates(tr)
    top = late.max()
    ratios = late / top if top > 0 else np.zeros_like(late)
    s = calibrate_scale(M, rhs, r_end)
    x_hat = s * r_end
    errs = None
    if np.linalg.norm(rhs) > 0:
        errs = np.array([lsq_error(M, rhs, calibrate_scale(M, rhs, r) * r)
                         for r in rs.rates])
    firsts = [tr.spikes(n)[0] for n in tr.neuron_ids if len(tr.spikes(n))]
    meta = {"input_unit_uA": hw.input_unit, "timescale_ns": T,
            "synapse_gain": hw.synapse_gain, "lambda": lam, "alpha": alpha,
            "u0_over_eta": u0 / eta, "horizon_ns": t_end}
    return SolveResult(x_hat, r_end, late, ratios, s, rs.times, errs,
                       max(firsts) if firsts else None, tr, meta)


# gates -----------------------------------------------------------------------

@dataclass(frozen=True)
class GateSpec:
    kind: str = "AND"
    n_inputs: int = 3
    pattern: tuple = ()
    delta: float = 0.1

    def __post_init__(self):
        if self.kind not in ("AND", "OR"):
            raise ConfigurationError(f"unknown gate kind {self.kind!r}")
        if self.n_inputs < 1:
            raise ConfigurationError("a gate needs at least one input")
        if not 0 < self.delta < 0.5:
            raise ConfigurationError("delta must lie in (0, 0.5)")
        if self.pattern and len(self.pattern) != self.n_inputs:
            raise ConfigurationError("pattern length differs from n_inputs")


# Synaptic current delivered per firing input (uA) and the constant input
# drive that makes an input neuron deliver it through a 27 uA synapse.
GATE_OPERATING_POINT = {
    "AND": {"level": 2.16, "drive": 3.8},
    "OR": {"level": 6.0, "drive": 10.0},
}
INPUT_RISE = 5.0  # ns


def gate_spec_compositional(g: GateSpec) -> CompositionalSpec:
    L = gate_weight(g.delta)
    n = g.n_inputs
    # AND: fires only when all n inputs do; OR: when any one does.
    b_out = (n - 0.5) * L if g.kind == "AND" else 0.5 * L
    b = {f"in{k + 1}": 0.0 for k in range(n)}
    b["out"] = b_out
    w = {(f"in{k + 1}", "out"): L for k in range(n)}
    return CompositionalSpec(b, w, inputs=tuple(f"in{k + 1}" for k in range(n)))


def _operating_point(g: GateSpec) -> dict:
    # a one-input AND is a buffer, which is the OR construction
    return GATE_OPERATING_POINT["OR" if g.n_inputs == 1 else g.kind]


def gate_hardware(g: GateSpec) -> GateHardware:
    return GateHardware(level=_operating_point(g)["level"], weight_unit=gate_weight(g.delta))


def gate_drive(g: GateSpec) -> float:
    return _operating_point(g)["drive"]


def build_gate(g: GateSpec, hw: HardwareDefaults = HardwareDefaults(),
               pattern: tuple | None = None) -> NetworkGraph:
    net = from_compositional(gate_spec_compositional(g), hw, gate_hardware(g))
    pattern = g.pattern if pattern is None else pattern
    if pattern:
        amp = gate_drive(g)
        for k, bit in enumerate(pattern):
            if bit:
                net = net.with_drive(f"in{k + 1}", InputDrive.constant(amp, rise=INPUT_RISE))
    return net


@dataclass
class GateRow:
    pattern: tuple
    output: int
    inputs_fired: tuple
    spike_counts: dict


def _gate_row(args):
    g, pattern, cfg, hw, form, oracle_dt = args
    tr = run_network(build_gate(g, hw, pattern), cfg, form, oracle_dt)
    c = tr.spike_counts()
    fired = tuple(int(c[f"in{k + 1}"] > 0) for k in range(g.n_inputs))
    return GateRow(tuple(pattern), int(c["out"] > 0), fired, c)


def evaluate_gate(g: GateSpec, cfg: IntegratorConfig | None = None,
                  hw: HardwareDefaults = HardwareDefaults(), workers: int = 1,
                  patterns=None, neuron_form: str = "kcl",
                  oracle_dt: float | None = None) -> list[GateRow]:
    """Truth table over all input patterns (or the given ones)."""
    cfg = cfg or IntegratorConfig(t_end=1000.0, record_dt=1.0)
    if patterns is None:
        patterns = list(itertools.product((0, 1), repeat=g.n_inputs))
    jobs = [(g, tuple(p), cfg, hw, neuron_form, oracle_dt) for p in patterns]
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            return list(ex.map(_gate_row, jobs))
    return [_gate_row(j) for j in jobs]


def truth(kind: str, pattern) -> int:
    return int(all(pattern)) if kind == "AND" else int(any(pattern))


# excitation and inhibition -----------------------------------------------------

def excitation_inhibition_network(I_bias_h: float = 27.0, on: float = 300.0,
                                  off: float = 700.0, bias: float = 40.0,
                                  drives: tuple = (22.0, 19.0, 22.0)) -> NetworkGraph:
    """Neuron n1, active between `on` and `off`, excites n2 (held below
    threshold on its own) and inhibits n3 (firing on its own)."""
    n = NeuronParams.default(bias)
    a, b, c = drives
    d1 = InputDrive.piecewise([(0.0, 0.0), (on, 0.0), (on + INPUT_RISE, a),
                               (off, a), (off + INPUT_RISE, 0.0)])
    return (NetworkGraph()
            .add_neuron("n1", n, d1)
            .add_neuron("n2", n, InputDrive.constant(b, rise=INPUT_RISE))
            .add_neuron("n3", n, InputDrive.constant(c, rise=INPUT_RISE))
            .add_synapse("n1", "n2", SynapseParams.default(I_bias_h))
            .add_synapse("n1", "n3", SynapseParams.default(-I_bias_h)))
