"""Spike statistics, solution error, tunability sweeps and trace checks."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .circuit import NeuronParams, SynapseParams
from .drives import InputDrive
from .errors import ConfigurationError
from .integrator import IntegratorConfig, SimulationTrace, simulate
from .network import AssembledNetwork, NetworkGraph, assemble


@dataclass
class RateSeries:
    times: np.ndarray            # (M,)
    counts: np.ndarray           # (M, N) cumulative spike counts N(t)
    rates: np.ndarray            # (M, N) N(t) / t
    neuron_ids: tuple = ()
    timescale: float | None = None

    def normalized(self) -> np.ndarray:
        """Rates in spikes per neuron timescale."""
        if self.timescale is None:
            raise ConfigurationError("no timescale set")
        return self.rates * self.timescale


def firing_rates(trace: SimulationTrace, sample_dt: float, t_end: float | None = None,
                 timescale: float | None = None) -> RateSeries:
    t_end = trace.t_end if t_end is None else t_end
    n = max(int(np.floor(t_end / sample_dt + 1e-9)), 1)
    times = sample_dt * np.arange(1, n + 1)
    times[-1] = min(times[-1], t_end)
    ids = tuple(trace.neuron_ids)
    counts = np.zeros((n, len(ids)), dtype=np.int64)
    for k, nid in enumerate(ids):
        counts[:, k] = np.searchsorted(np.sort(trace.spikes(nid)), times, side="right")
    rates = counts / times[:, None]
    return RateSeries(times, counts, rates, ids, timescale)


def window_rates(trace: SimulationTrace, t0: float, t1: float) -> np.ndarray:
    """Spike count per unit time in [t0, t1) for every neuron."""
    return np.array([np.count_nonzero((s >= t0) & (s < t1)) / (t1 - t0)
                     for s in (trace.spikes(n) for n in trace.neuron_ids)])


def late_rates(trace: SimulationTrace, fraction: float = 0.5) -> np.ndarray:
    """Steady-state rates over the last `fraction` of the horizon."""
    return window_rates(trace, trace.t_end * (1 - fraction), trace.t_end)


def lsq_error(A, b, x) -> float:
    A = np.atleast_2d(np.asarray(A, float))
    b = np.asarray(b, float)
    x = np.asarray(x, float)
    nb = np.linalg.norm(b)
    if nb == 0:
        raise ValueError("relative error undefined for b = 0")
    return float(np.linalg.norm(A @ x - b) / nb)


def calibrate_scale(A, b, r) -> float:
    """s minimizing ||A (s r) - b||."""
    Ar = np.asarray(A, float) @ np.asarray(r, float)
    d = float(Ar @ Ar)
    return float(Ar @ np.asarray(b, float)) / d if d > 0 else 0.0


def best_scale_deviation(r, target) -> tuple[float, np.ndarray]:
    """Scale s minimizing the largest relative deviation of s*r from target
    over the nonzero target entries; returns (s, relative deviations)."""
    r = np.asarray(r, float)
    t = np.asarray(target, float)
    nz = t != 0
    q = r[nz] / t[nz]
    if not np.all(q > 0):
        return 0.0, np.where(nz, 1.0, 0.0)
    s = 2.0 / (q.min() + q.max())
    return s, np.where(nz, s * r / np.where(nz, t, 1.0) - 1.0, 0.0)


def spike_period(spikes: np.ndarray, skip: int = 2) -> float:
    s = np.asarray(spikes)[skip:]
    if len(s) < 2:
        return np.inf
    return float(np.mean(np.diff(s)))


# sweeps --------------------------------------------------------------------

def _single_neuron(p: NeuronParams, i_in: float, rise: float) -> NetworkGraph:
    return NetworkGraph().add_neuron("n", p, InputDrive.constant(i_in, rise=rise))


def _rate_cell(args):
    p, i_in, bias, cfg, rise = args
    g = _single_neuron(replace(p, I_bias=bias), i_in, rise)
    return float(late_rates(simulate(g, cfg))[0])


def _map(fn, jobs, workers):
    if workers and workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            return list(ex.map(fn, jobs))
    return [fn(j) for j in jobs]


def sweep_firing_map(p: NeuronParams, I_in, I_bias, cfg: IntegratorConfig | None = None,
                     rise: float = 5.0, workers: int = 1) -> np.ndarray:
    """Steady-state firing rate (1/ns) over an I_in x I_bias grid."""
    cfg = cfg or IntegratorConfig(t_end=400.0)
    I_in = np.atleast_1d(np.asarray(I_in, float))
    I_bias = np.atleast_1d(np.asarray(I_bias, float))
    jobs = [(p, a, b, cfg, rise) for a in I_in for b in I_bias]
    return np.array(_map(_rate_cell, jobs, workers)).reshape(len(I_in), len(I_bias))


def _period_cell(args):
    p, i_in, bias, cfg, rise = args
    tr = simulate(_single_neuron(replace(p, I_bias=bias), i_in, rise), cfg)
    s = tr.spikes("n")
    return spike_period(s[s >= 0.5 * cfg.t_end], skip=0)


def sweep_period(p: NeuronParams, I_in, bias: float, cfg: IntegratorConfig | None = None,
                 rise: float = 5.0, workers: int = 1) -> np.ndarray:
    """Mean inter-spike interval (ns) over the last half of the horizon for
    each input current; inf where the neuron does not oscillate."""
    cfg = cfg or IntegratorConfig(t_end=400.0)
    jobs = [(p, float(a), float(bias), cfg, rise) for a in np.atleast_1d(I_in)]
    return np.array(_map(_period_cell, jobs, workers))


def spike_train_network(syn: SynapseParams, spike_times, neuron: NeuronParams | None = None
                        ) -> NetworkGraph:
    """Source neuron made to fire once per entry of `spike_times`, feeding a
    synapse into an unbiased sink."""
    neuron = neuron or NeuronParams.default(40.0)
    # one spike per pulse: the main branch needs a few L/R times to reach I_c
    drive = InputDrive.pulses(40.0, spike_times, width=5.0, rise=0.5)
    return (NetworkGraph().add_neuron("src", neuron, drive)
            .add_neuron("sink", NeuronParams.default(0.0))
            .add_synapse("src", "sink", syn))


@dataclass
class SynapseResponse:
    value: float
    times: np.ndarray
    i3: np.ndarray
    i5: np.ndarray
    spikes: np.ndarray


def _syn_cell(args):
    syn, spikes, cfg, value = args
    tr = simulate(spike_train_network(syn, spikes), cfg)
    return SynapseResponse(value, tr.times, tr.column("syn0(src->sink).i3"),
                           tr.column("syn0(src->sink).i5"), tr.spikes("src"))


def sweep_synapse(p: SynapseParams, spike_times, L_syn=None, I_bias_h=None,
                  cfg: IntegratorConfig | None = None, workers: int = 1
                  ) -> list[SynapseResponse]:
    if (L_syn is None) == (I_bias_h is None):
        raise ConfigurationError("sweep exactly one of L_syn or I_bias_h")
    cfg = cfg or IntegratorConfig(t_end=float(max(spike_times)) + 1500.0, record_dt=0.5)
    jobs = []
    if L_syn is not None:
        for v in L_syn:
            jobs.append((replace(p, L_syn=float(v)), spike_times, cfg, float(v)))
    else:
        for v in I_bias_h:
            ch = p.htron_channel
            ic = max(ch.I_c, 1.1 * abs(v))
            ch = replace(ch, I_c=ic, I_r=ch.I_r / ch.I_c * ic)
            jobs.append((replace(p, I_bias_h=float(v), htron_channel=ch), spike_times,
                         cfg, float(v)))
    return _map(_syn_cell, jobs, workers)


def decay_time(r: SynapseResponse, level: float = np.exp(-1.0)) -> float:
    """Time after the last spike for |i3| to fall to `level` of its value
    at that spike's end of charging (peak after the train)."""
    t_last = r.spikes[-1] if len(r.spikes) else 0.0
    after = r.times >= t_last
    t, i3 = r.times[after], np.abs(r.i3[after])
    if len(t) == 0 or i3.max() == 0:
        return 0.0
    k = int(np.argmax(i3))
    below = np.nonzero(i3[k:] <= level * i3[k])[0]
    if len(below) == 0:
        return np.inf
    return float(t[k + below[0]] - t[k])


# trace property checks ----------------------------------------------------------

def _flag_current(net: AssembledNetwork, f: int) -> int:
    N = net.n_neurons
    if f < 2 * N:
        return net.neuron_offset(f // 2) + 2 * (f % 2)
    return net.synapse_offset(f - 2 * N)


def hysteresis_violations(trace: SimulationTrace, net, slack: float = 1e-8) -> list[str]:
    """Every recorded transition must sit on the matching threshold crossing:
    0->1 with |i| >= I_c (or with the upstream neuron switching, for forced
    synapses) and 1->0 with |i| <= I_r."""
    net = assemble(net) if isinstance(net, NetworkGraph) else net
    N = net.n_neurons
    out = []
    times = trace.times
    for t, f, v in zip(trace.ev_t, trace.ev_f, trace.ev_v):
        j = int(np.searchsorted(times, t))
        if j >= len(times) or times[j] != t:
            out.append(f"{trace.flag_labels[f]}: transition at {t} not a recorded instant")
            continue
        i = abs(trace.states[j, _flag_current(net, f)])
        if f < 2 * N:
            row = net.neuron_rows[f // 2]
            ic, ir = row[1 + 4 * (f % 2)], row[2 + 4 * (f % 2)]
            forced = False
        else:
            row = net.synapse_rows[f - 2 * N]
            ic, ir = row[1], row[2]
            up = net.upstream_flag(f - 2 * N)
            forced = bool(trace.flags[j, up]) and v == 1
            if not forced and v == 0 and trace.flags[j, up]:
                out.append(f"{trace.flag_labels[f]}: released while upstream fires at {t}")
                continue
        if v == 1 and not forced and i < ic - slack:
            out.append(f"{trace.flag_labels[f]}: 0->1 at {t} with |i|={i} < I_c={ic}")
        if v == 0 and i > ir + slack:
            out.append(f"{trace.flag_labels[f]}: 1->0 at {t} with |i|={i} > I_r={ir}")
        if j > 0:
            prev = trace.flags[j - 1, f]
            if prev == v:
                out.append(f"{trace.flag_labels[f]}: no change recorded at {t}")
    return out


def conservation_residuals(trace: SimulationTrace, net) -> tuple[float, float]:
    """Largest drift of i1+i2+i3 and of i3-i4-i5 over all synapses."""
    net = assemble(net) if isinstance(net, NetworkGraph) else net
    a = b = 0.0
    for s in range(net.n_synapses):
        o = net.synapse_offset(s)
        y = trace.states[:, o:o + 5]
        q1 = y[:, 0] + y[:, 1] + y[:, 2]
        q2 = y[:, 2] - y[:, 3] - y[:, 4]
        a = max(a, float(np.max(np.abs(q1 - q1[0]))))
        b = max(b, float(np.max(np.abs(q2 - q2[0]))))
    return a, b


def match_spikes(a: np.ndarray, b: np.ndarray) -> float:
    """Largest |a_k - b_k| for equal-length spike trains (inf otherwise)."""
    if len(a) != len(b):
        return np.inf
    if len(a) == 0:
        return 0.0
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))))
