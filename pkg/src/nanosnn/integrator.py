"""Hybrid integration of assembled networks.

Between switching events the smooth equations are advanced with an adaptive
Dormand-Prince 5(4) scheme.  A threshold crossing inside an accepted step is
located by bisection on the continuous extension, the flags are updated at
that instant, and integration restarts from there.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace

import numpy as np

from . import _pykernel
from .errors import ChatterError, ConfigurationError, DivergenceError
from .network import AssembledNetwork, NetworkGraph, assemble, quiescent_state

try:
    if os.environ.get("NANOSNN_PURE", "") not in ("", "0"):
        raise ImportError("pure mode requested")
    from . import _ckernel as _kernel
    BACKEND = "compiled"
except ImportError:
    _kernel = _pykernel
    BACKEND = "python"

KERNELS = {"python": _pykernel}
if BACKEND == "compiled":
    KERNELS["compiled"] = _kernel


@dataclass(frozen=True)
class IntegratorConfig:
    t_end: float = 100.0          # ns
    rel_tol: float = 1e-12
    abs_tol: float = 1e-11        # uA
    dt_max: float = 0.5           # ns
    dt_event: float = 1e-4        # ns (0.1 ps)
    dt_init: float = 1e-3         # ns; also the restart step after a switch
    seed: int = 0
    noise_sigma: float = 0.0      # uA
    record_dt: float = 0.0        # ns; 0 keeps every accepted step
    event_cap: int = 10000        # switching events tolerated per chatter window
    chatter_window: float = 1.0   # ns

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ConfigurationError("tolerances must be positive")
        if not 0 < self.dt_event <= self.dt_max:
            raise ConfigurationError("need 0 < dt_event <= dt_max")
        if not self.t_end > 0:
            raise ConfigurationError("t_end must be positive")
        if self.noise_sigma < 0:
            raise ConfigurationError("noise_sigma must be non-negative")

    def tightened(self, factor: float = 0.5) -> "IntegratorConfig":
        return replace(self, rel_tol=self.rel_tol * factor, abs_tol=self.abs_tol * factor)


@dataclass
class SimulationTrace:
    times: np.ndarray
    states: np.ndarray
    flags: np.ndarray
    spike_events: dict[str, np.ndarray]
    switch_events: list[tuple[float, str, int]]
    state_labels: list[str] = field(default_factory=list)
    flag_labels: list[str] = field(default_factory=list)
    neuron_ids: tuple = ()
    t_end: float = 0.0
    backend: str = ""
    # raw event arrays (time, flag index, new value)
    ev_t: np.ndarray | None = None
    ev_f: np.ndarray | None = None
    ev_v: np.ndarray | None = None

    def column(self, label: str) -> np.ndarray:
        return self.states[:, self.state_labels.index(label)]

    def flag(self, label: str) -> np.ndarray:
        return self.flags[:, self.flag_labels.index(label)]

    def spikes(self, nid) -> np.ndarray:
        return self.spike_events[str(nid)]

    def spike_counts(self) -> dict[str, int]:
        return {k: len(v) for k, v in self.spike_events.items()}


def _arrays(net: AssembledNetwork) -> dict:
    return {
        "N": net.n_neurons, "S": net.n_synapses,
        "nrows": np.ascontiguousarray(net.neuron_rows, float).reshape(-1, 12),
        "srows": np.ascontiguousarray(net.synapse_rows, float).reshape(-1, 10),
        "src": np.ascontiguousarray(net.src, np.int32),
        "tgt": np.ascontiguousarray(net.tgt, np.int32),
        "doff": np.ascontiguousarray(net.drive_offsets, np.int32),
        "dt": np.ascontiguousarray(net.drive_t, float),
        "dv": np.ascontiguousarray(net.drive_v, float),
        "dtail": np.ascontiguousarray(net.drive_tail, float),
        "breakpoints": np.ascontiguousarray(net.breakpoints, float),
        "form": net.form_index,
    }


def _as_net(net) -> AssembledNetwork:
    return assemble(net) if isinstance(net, NetworkGraph) else net


def _run(net, cfg: IntegratorConfig, method: int, dt_fixed: float, backend: str | None):
    net = _as_net(net)
    kern = KERNELS[backend] if backend else _kernel
    y0 = quiescent_state(net)
    fl0 = np.zeros(net.n_flags, np.int8)
    opts = {
        "t_end": float(cfg.t_end), "rtol": cfg.rel_tol, "atol": cfg.abs_tol,
        "dt_max": cfg.dt_max, "dt_event": cfg.dt_event, "dt_init": cfg.dt_init,
        "noise_sigma": cfg.noise_sigma, "record_dt": cfg.record_dt,
        "event_cap": int(cfg.event_cap), "chatter_window": cfg.chatter_window,
        "method": method, "dt_fixed": dt_fixed,
    }
    rng = np.random.default_rng(cfg.seed) if cfg.noise_sigma > 0 else None
    res = kern.integrate(_arrays(net), y0, fl0, opts, rng)
    flabels = net.flag_labels()
    if res["status"] == _pykernel.DIVERGED:
        raise DivergenceError("integration diverged", t_last=res["t_last"])
    if res["status"] == _pykernel.CHATTER:
        who = flabels[res["info"]]
        raise ChatterError(f"event chattering at t={res['t_last']:.6g} ns on {who}",
                           element=who, t=res["t_last"])
    ev_t, ev_f, ev_v = res["ev_t"], res["ev_f"], res["ev_v"]
    spikes = {}
    for k, nid in enumerate(net.neuron_ids):
        sel = (ev_f == 2 * k + 1) & (ev_v == 1)
        spikes[nid] = ev_t[sel]
    switch = [(float(t), flabels[f], int(v)) for t, f, v in zip(ev_t, ev_f, ev_v)]
    return SimulationTrace(
        times=res["times"], states=res["states"], flags=res["flags"],
        spike_events=spikes, switch_events=switch, state_labels=net.state_labels(),
        flag_labels=flabels, neuron_ids=net.neuron_ids, t_end=float(cfg.t_end),
        backend=getattr(kern, "NAME", "python"), ev_t=ev_t, ev_f=ev_f, ev_v=ev_v)


def simulate(net, cfg: IntegratorConfig = IntegratorConfig(), backend: str | None = None
             ) -> SimulationTrace:
    return _run(net, cfg, 0, 0.0, backend)


def simulate_fixed_step_oracle(net, dt: float = 1e-3, t_end: float | None = None,
                               cfg: IntegratorConfig | None = None,
                               backend: str | None = None) -> SimulationTrace:
    """Forward Euler with a threshold check after every step."""
    cfg = cfg or IntegratorConfig()
    if t_end is not None:
        cfg = replace(cfg, t_end=t_end)
    return _run(net, cfg, 1, float(dt), backend)


def rhs(net, t: float, y, flags, backend: str | None = None) -> np.ndarray:
    net = _as_net(net)
    kern = KERNELS[backend] if backend else _kernel
    return np.asarray(kern.rhs(_arrays(net), float(t), np.asarray(y, float),
                               np.asarray(flags, np.int8)))


def run_network(net, cfg: IntegratorConfig, neuron_form: str = "kcl",
                oracle_dt: float | None = None, backend: str | None = None) -> SimulationTrace:
    """simulate, or the Euler oracle when `oracle_dt` is given, with the
    chosen neuron equation form."""
    if isinstance(net, NetworkGraph):
        net = assemble(net, neuron_form)
    if oracle_dt:
        return simulate_fixed_step_oracle(net, oracle_dt, cfg=cfg, backend=backend)
    return simulate(net, cfg, backend)
