"""Network description and assembly into one flat hybrid state system."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field, replace

import numpy as np

from .circuit import NEURON_FORMS, NeuronParams, SynapseParams, _form_index
from .drives import NO_DRIVE, InputDrive
from .errors import ConfigurationError, ValidationError

NEURON_VARS = ("i1", "i2", "i3", "i4")
SYNAPSE_VARS = ("i1", "i2", "i3", "i4", "i5")


@dataclass(frozen=True)
class NeuronNode:
    id: str
    params: NeuronParams
    drive: InputDrive = NO_DRIVE


@dataclass(frozen=True)
class SynapseEdge:
    source: str
    target: str
    params: SynapseParams


@dataclass
class NetworkGraph:
    neurons: list[NeuronNode] = field(default_factory=list)
    synapses: list[SynapseEdge] = field(default_factory=list)

    def add_neuron(self, id, params, drive=NO_DRIVE):
        self.neurons.append(NeuronNode(str(id), params, drive))
        return self

    def add_synapse(self, source, target, params):
        self.synapses.append(SynapseEdge(str(source), str(target), params))
        return self

    def neuron(self, id) -> NeuronNode:
        for n in self.neurons:
            if n.id == id:
                return n
        raise KeyError(id)

    def with_drive(self, id, drive) -> "NetworkGraph":
        return NetworkGraph([replace(n, drive=drive) if n.id == id else n
                             for n in self.neurons], list(self.synapses))

    def without_synapse(self, index: int) -> "NetworkGraph":
        return NetworkGraph(list(self.neurons),
                            [s for k, s in enumerate(self.synapses) if k != index])

    def validate(self):
        dup = [i for i, c in Counter(n.id for n in self.neurons).items() if c > 1]
        if dup:
            raise ValidationError(f"duplicate neuron ids: {dup}", dup)
        ids = {n.id for n in self.neurons}
        dangling = [f"{k}:{s.source}->{s.target}" for k, s in enumerate(self.synapses)
                    if s.source not in ids or s.target not in ids]
        if dangling:
            raise ValidationError(f"synapses with unknown endpoints: {dangling}", dangling)

    def scaled_time(self, k: float) -> "NetworkGraph":
        """Every inductance times k and every drive slowed by k."""
        def nw(p):
            return replace(p, L0=p.L0 * k)

        neurons = [replace(n, params=replace(n.params, nw1=nw(n.params.nw1),
                                             nw2=nw(n.params.nw2),
                                             L1=n.params.L1 * k, L2=n.params.L2 * k),
                           drive=n.drive.scaled_time(k)) for n in self.neurons]
        syns = [replace(s, params=replace(s.params, htron_channel=nw(s.params.htron_channel),
                                          L_syn=s.params.L_syn * k, L_out=s.params.L_out * k))
                for s in self.synapses]
        return NetworkGraph(neurons, syns)


@dataclass(frozen=True)
class AssembledNetwork:
    """Flat arrays consumed by the integration kernels.

    State layout: neuron k owns y[4k:4k+4]; synapse s owns
    y[4N+5s:4N+5s+5].  Flag layout: n1 of neuron k at 2k, n2 at 2k+1, h of
    synapse s at 2N+s.
    """
    graph: NetworkGraph
    neuron_ids: tuple
    neuron_rows: np.ndarray       # (N, 12)
    neuron_bias: np.ndarray       # (N,)
    synapse_rows: np.ndarray      # (S, 10)
    synapse_bias: np.ndarray      # (S,)
    src: np.ndarray               # (S,) int32, index of source neuron
    tgt: np.ndarray               # (S,) int32, index of target neuron
    drive_offsets: np.ndarray     # (N+1,) int32
    drive_t: np.ndarray
    drive_v: np.ndarray
    drive_tail: np.ndarray        # (N,)
    breakpoints: np.ndarray       # sorted unique knot times > 0
    neuron_form: str = "kcl"

    @property
    def n_neurons(self) -> int:
        return len(self.neuron_ids)

    @property
    def n_synapses(self) -> int:
        return len(self.src)

    @property
    def n_states(self) -> int:
        return 4 * self.n_neurons + 5 * self.n_synapses

    @property
    def n_flags(self) -> int:
        return 2 * self.n_neurons + self.n_synapses

    @property
    def form_index(self) -> int:
        return _form_index(self.neuron_form)

    def neuron_offset(self, k: int) -> int:
        return 4 * k

    def synapse_offset(self, s: int) -> int:
        return 4 * self.n_neurons + 5 * s

    def incoming(self, k: int) -> list[int]:
        """Output-branch (i5) state offsets of synapses feeding neuron k."""
        return [self.synapse_offset(s) + 4 for s in range(self.n_synapses)
                if self.tgt[s] == k]

    def upstream_flag(self, s: int) -> int:
        return 2 * int(self.src[s]) + 1

    def synapse_label(self, s: int) -> str:
        e = self.graph.synapses[s]
        return f"syn{s}({e.source}->{e.target})"

    def state_labels(self) -> list[str]:
        out = [f"{nid}.{v}" for nid in self.neuron_ids for v in NEURON_VARS]
        out += [f"{self.synapse_label(s)}.{v}" for s in range(self.n_synapses)
                for v in SYNAPSE_VARS]
        return out

    def flag_labels(self) -> list[str]:
        out = [f"{nid}.{f}" for nid in self.neuron_ids for f in ("n1", "n2")]
        out += [f"{self.synapse_label(s)}.h" for s in range(self.n_synapses)]
        return out


def assemble(g: NetworkGraph, neuron_form: str = "kcl") -> AssembledNetwork:
    g.validate()
    if neuron_form not in NEURON_FORMS:
        raise ConfigurationError(f"unknown neuron form {neuron_form!r}")
    ids = tuple(n.id for n in g.neurons)
    index = {nid: k for k, nid in enumerate(ids)}
    nrows = np.array([n.params.as_row() for n in g.neurons], float).reshape(-1, 12)
    srows = np.array([s.params.as_row() for s in g.synapses], float).reshape(-1, 10)
    offs, dt, dv, tail = [0], [], [], []
    for n in g.neurons:
        ts, vs, sl = n.drive.knots()
        dt += ts
        dv += vs
        tail.append(sl)
        offs.append(len(dt))
    bps = sorted({t for t in dt if t > 0})
    return AssembledNetwork(
        graph=g, neuron_ids=ids, neuron_rows=nrows,
        neuron_bias=np.array([n.params.I_bias for n in g.neurons], float),
        synapse_rows=srows,
        synapse_bias=np.array([s.params.I_bias_h for s in g.synapses], float),
        src=np.array([index[s.source] for s in g.synapses], np.int32),
        tgt=np.array([index[s.target] for s in g.synapses], np.int32),
        drive_offsets=np.array(offs, np.int32), drive_t=np.array(dt, float),
        drive_v=np.array(dv, float), drive_tail=np.array(tail, float),
        breakpoints=np.array(bps, float), neuron_form=neuron_form)


def quiescent_state(net: AssembledNetwork) -> np.ndarray:
    """DC rest state: bias split by the branch inductances, synapse bias in
    the superconducting channel, all flags 0.

    The "kcl" form measures both branch currents from the input node to
    ground, so a bias that circulates oppositely through the two oscillators
    shows up with the same sign in i1 and i3.  The other forms count the
    control branch around the loop, which flips the sign of i1."""
    y = np.zeros(net.n_states)
    ctrl_sign = 1.0 if net.neuron_form == "kcl" else -1.0
    bad = []
    for k, node in enumerate(net.graph.neurons):
        p = node.params
        o = net.neuron_offset(k)
        i0, _ = node.drive.evaluate(0.0)
        y[o] = ctrl_sign * p.quiescent_control + (1 - p.split) * i0
        y[o + 2] = p.quiescent_main + p.split * i0
        if abs(y[o]) > p.nw1.I_c or abs(y[o + 2]) > p.nw2.I_c:
            bad.append(node.id)
    if bad:
        raise ConfigurationError(
            f"quiescent current exceeds I_c in neurons {bad}; they would fire with no input")
    hot = [net.synapse_label(s) for s, e in enumerate(net.graph.synapses)
           if not abs(e.params.I_bias_h) < e.params.htron_channel.I_c]
    if hot:
        raise ConfigurationError(
            f"synapse bias at or above the channel critical current in {hot}")
    for s, e in enumerate(net.graph.synapses):
        y[net.synapse_offset(s)] = e.params.I_bias_h
    return y
