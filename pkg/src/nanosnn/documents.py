"""Structured input documents.

A document is a JSON object whose top-level ``kind`` field selects the
schema: ``network``, ``lif``, ``compositional``, ``linear_problem``, ``gate``
or ``sweep``.  Physical fields carry their unit in the name (``L_syn_nH``,
``I_bias_uA``, ``R_out_ohm``, ``timescale_ns``); nothing is unit-inferred.
Graph kinds accept a vector ``V`` of node values and a matrix ``E`` of edge
values, with ``E[i][j]`` describing the connection from node j into node i.

Parsing fills every default from HardwareDefaults, and the normalized
document with those defaults spelled out is kept on the result, so
``serialize_document(parse_network_document(text))`` reproduces the run.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field

import numpy as np

from .apps import GateSpec, LinearProblem
from .circuit import NEURON_FORMS, NanowireParams, NeuronParams, SynapseParams
from .drives import KINDS as DRIVE_KINDS, InputDrive
from .errors import ConfigurationError, DocumentError, ValidationError
from .network import NetworkGraph
from .translator import CompositionalSpec, GateHardware, HardwareDefaults, LifSpec

DOCUMENT_KINDS = ("network", "lif", "compositional", "linear_problem", "gate", "sweep")

# attribute name -> document field name
HARDWARE_FIELDS = {
    "L_nw": "L_nw_nH", "L1": "L1_nH", "L2": "L2_nH", "R1": "R1_ohm", "R2": "R2_ohm",
    "I_c": "I_c_uA", "R_hs": "R_hs_ohm", "retrap_fraction": "retrap_fraction",
    "L_nw_h": "L_nw_h_nH", "R_syn1": "R_syn1_ohm", "R_syn2": "R_syn2_ohm",
    "R_out": "R_out_ohm", "L_out": "L_out_nH", "beta": "beta",
    "htron_ic_margin": "htron_ic_margin", "htron_retrap_fraction": "htron_retrap_fraction",
    "htron_ic_max": "htron_ic_max_uA", "synapse_gain": "synapse_gain",
    "input_unit": "input_unit_uA", "timescale": "timescale_ns",
    "negative_ramp_cap": "negative_ramp_cap_uA",
}
_NULLABLE = {"htron_ic_max", "negative_ramp_cap"}
GATE_HARDWARE_FIELDS = {"synapse_bias": "synapse_bias_uA", "input_bias": "input_bias_uA",
                        "level": "level_uA", "weight_unit": "weight_unit",
                        "L_syn": "L_syn_nH"}
_NANOWIRE = {"L0": "L0_nH", "I_c": "I_c_uA", "I_r": "I_r_uA", "R_hs": "R_hs_ohm"}


@dataclass
class SweepSpec:
    target: str                        # "firing_map" or "synapse"
    values: dict = field(default_factory=dict)


@dataclass
class ParsedDocument:
    kind: str
    value: object
    hardware: HardwareDefaults
    options: dict
    document: dict


# low-level field access ------------------------------------------------------

class _Reader:
    def __init__(self, text: str | None):
        self.text = text or ""

    def line_of(self, path: str) -> int | None:
        """Best-effort line of the last named key in `path`."""
        pos = 0
        found = None
        for key in re.findall(r"[A-Za-z_][A-Za-z0-9_]*", path):
            m = re.search(r'"%s"\s*:' % re.escape(key), self.text[pos:])
            if m is None:
                break
            pos += m.start()
            found = pos
            pos += 1
        return None if found is None else self.text.count("\n", 0, found) + 1

    def fail(self, msg, path):
        raise DocumentError(msg, path, self.line_of(path))

    def obj(self, v, path):
        if not isinstance(v, dict):
            self.fail("expected an object", path)
        return v

    def check_keys(self, d, allowed, path):
        extra = sorted(set(d) - set(allowed))
        if extra:
            self.fail(f"unknown field(s) {extra}", f"{path}.{extra[0]}" if path else extra[0])

    def num(self, d, key, path, default=None, required=False, nullable=False):
        p = f"{path}.{key}" if path else key
        if key not in d:
            if required:
                self.fail("required field missing", p)
            return default
        v = d[key]
        if v is None and nullable:
            return None
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            self.fail(f"expected a finite number, got {v!r}", p)
        return float(v)

    def integer(self, d, key, path, default=None):
        v = self.num(d, key, path, default)
        if v is not None and v != int(v):
            self.fail(f"expected an integer, got {v!r}", f"{path}.{key}" if path else key)
        return None if v is None else int(v)

    def string(self, d, key, path, default=None, choices=None):
        p = f"{path}.{key}" if path else key
        v = d.get(key, default)
        if v is None:
            self.fail("required field missing", p)
        if not isinstance(v, str):
            self.fail(f"expected a string, got {v!r}", p)
        if choices and v not in choices:
            self.fail(f"must be one of {list(choices)}, got {v!r}", p)
        return v

    def vector(self, d, key, path, n=None, default=None):
        p = f"{path}.{key}" if path else key
        v = d.get(key, default)
        if v is None:
            self.fail("required field missing", p)
        if not isinstance(v, list):
            self.fail("expected a list", p)
        if n is not None and len(v) != n:
            self.fail(f"dimension mismatch: expected {n} entries, got {len(v)}", p)
        return [self._scalar(x, f"{p}[{k}]") for k, x in enumerate(v)]

    def _scalar(self, x, p):
        if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
            self.fail(f"expected a finite number, got {x!r}", p)
        return float(x)

    def matrix(self, d, key, path, n):
        p = f"{path}.{key}" if path else key
        rows = d.get(key)
        if rows is None:
            self.fail("required field missing", p)
        if not isinstance(rows, list) or len(rows) != n:
            self.fail(f"dimension mismatch: expected {n} rows", p)
        out = []
        for i, r in enumerate(rows):
            if not isinstance(r, list) or len(r) != n:
                got = len(r) if isinstance(r, list) else type(r).__name__
                self.fail(f"dimension mismatch: row {i} should have {n} entries, got {got}",
                          f"{p}[{i}]")
            out.append([self._scalar(x, f"{p}[{i}][{j}]") for j, x in enumerate(r)])
        return out

    def ids(self, d, path, n):
        p = f"{path}.ids" if path else "ids"
        v = d.get("ids")
        if v is None:
            return [f"n{k + 1}" for k in range(n)]
        if not isinstance(v, list) or len(v) != n:
            self.fail(f"dimension mismatch: expected {n} ids", p)
        if not all(isinstance(x, str) and x for x in v):
            self.fail("ids must be non-empty strings", p)
        if len(set(v)) != n:
            self.fail("duplicate ids", p)
        return list(v)


# shared sub-schemas ------------------------------------------------------------

def _hardware(r: _Reader, d: dict, path="hardware") -> HardwareDefaults:
    hd = r.obj(d.get("hardware", {}), path)
    r.check_keys(hd, HARDWARE_FIELDS.values(), path)
    base = HardwareDefaults()
    kw = {}
    for attr, key in HARDWARE_FIELDS.items():
        kw[attr] = r.num(hd, key, path, getattr(base, attr), nullable=attr in _NULLABLE)
    try:
        return HardwareDefaults(**kw)
    except ConfigurationError as e:
        r.fail(str(e), path)


def hardware_to_dict(hw: HardwareDefaults) -> dict:
    return {key: getattr(hw, attr) for attr, key in HARDWARE_FIELDS.items()}


def _gate_hardware(r: _Reader, d: dict) -> GateHardware:
    gd = r.obj(d.get("gate_hardware", {}), "gate_hardware")
    r.check_keys(gd, GATE_HARDWARE_FIELDS.values(), "gate_hardware")
    base = GateHardware()
    return GateHardware(**{a: r.num(gd, k, "gate_hardware", getattr(base, a))
                           for a, k in GATE_HARDWARE_FIELDS.items()})


_DRIVE_KEYS = {
    "constant": ("amplitude_uA", "rise_ns", "t_start_ns"),
    "linear-ramp": ("ramp_rate_uA_per_ns", "t_start_ns", "cap_uA"),
    "pulse-train": ("amplitude_uA", "pulse_times_ns", "pulse_width_ns", "rise_ns"),
    "piecewise": ("points",),
}


def _drive(r: _Reader, v, path) -> InputDrive:
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return InputDrive.constant(float(v))
    d = r.obj(v, path)
    kind = r.string(d, "kind", path, choices=DRIVE_KINDS)
    r.check_keys(d, ("kind",) + _DRIVE_KEYS[kind], path)
    try:
        if kind == "constant":
            return InputDrive.constant(r.num(d, "amplitude_uA", path, required=True),
                                       rise=r.num(d, "rise_ns", path, 1.0),
                                       t_start=r.num(d, "t_start_ns", path, 0.0))
        if kind == "linear-ramp":
            return InputDrive.ramp(r.num(d, "ramp_rate_uA_per_ns", path, required=True),
                                   t_start=r.num(d, "t_start_ns", path, 0.0),
                                   cap=r.num(d, "cap_uA", path, None, nullable=True))
        if kind == "pulse-train":
            return InputDrive.pulses(r.num(d, "amplitude_uA", path, required=True),
                                     r.vector(d, "pulse_times_ns", path),
                                     width=r.num(d, "pulse_width_ns", path, required=True),
                                     rise=r.num(d, "rise_ns", path, 0.5))
        pts = d.get("points")
        if not isinstance(pts, list) or not pts:
            r.fail("expected a non-empty list of [t_ns, I_uA] pairs", f"{path}.points")
        out = []
        for k, p in enumerate(pts):
            if not isinstance(p, list) or len(p) != 2:
                r.fail("expected a [t_ns, I_uA] pair", f"{path}.points[{k}]")
            out.append((r._scalar(p[0], f"{path}.points[{k}][0]"),
                        r._scalar(p[1], f"{path}.points[{k}][1]")))
        return InputDrive.piecewise(out)
    except (ValidationError, ConfigurationError) as e:
        if isinstance(e, DocumentError):
            raise
        r.fail(str(e), path)


def drive_to_dict(dr: InputDrive) -> dict:
    return dr.to_dict()


def _nanowire(r, v, path, default: NanowireParams) -> NanowireParams:
    d = r.obj(v if v is not None else {}, path)
    r.check_keys(d, _NANOWIRE.values(), path)
    ic = r.num(d, "I_c_uA", path, default.I_c)
    ir_default = default.I_r / default.I_c * ic
    try:
        return NanowireParams(r.num(d, "L0_nH", path, default.L0), ic,
                              r.num(d, "I_r_uA", path, ir_default),
                              r.num(d, "R_hs_ohm", path, default.R_hs))
    except ConfigurationError as e:
        r.fail(str(e), path)


def _nanowire_dict(p: NanowireParams) -> dict:
    return {"L0_nH": p.L0, "I_c_uA": p.I_c, "I_r_uA": p.I_r, "R_hs_ohm": p.R_hs}


# network kind --------------------------------------------------------------------

_NEURON_KEYS = ("id", "I_bias_uA", "L1_nH", "L2_nH", "R1_ohm", "R2_ohm", "control", "main",
                "drive")
_SYNAPSE_KEYS = ("source", "target", "I_bias_h_uA", "L_syn_nH", "R_syn1_ohm", "R_syn2_ohm",
                 "R_out_ohm", "L_out_nH", "beta", "channel")


def _neuron(r, d, path, hw: HardwareDefaults, drive=None):
    r.check_keys(d, _NEURON_KEYS, path)
    nid = r.string(d, "id", path)
    base = hw.neuron(r.num(d, "I_bias_uA", path, 0.0))
    try:
        p = NeuronParams(_nanowire(r, d.get("control"), f"{path}.control", base.nw1),
                         _nanowire(r, d.get("main"), f"{path}.main", base.nw2),
                         r.num(d, "L1_nH", path, base.L1), r.num(d, "L2_nH", path, base.L2),
                         r.num(d, "R1_ohm", path, base.R1), r.num(d, "R2_ohm", path, base.R2),
                         base.I_bias)
    except ConfigurationError as e:
        r.fail(str(e), path)
    if "drive" in d:
        drive = _drive(r, d["drive"], f"{path}.drive")
    return nid, p, drive or InputDrive.constant(0.0)


def _synapse(r, d, path, hw: HardwareDefaults):
    r.check_keys(d, _SYNAPSE_KEYS, path)
    src = r.string(d, "source", path)
    tgt = r.string(d, "target", path)
    ibh = r.num(d, "I_bias_h_uA", path, 0.0)
    L = r.num(d, "L_syn_nH", path, hw.L_syn_for(0.02))
    try:
        base = hw.synapse(ibh, L)
        p = SynapseParams(_nanowire(r, d.get("channel"), f"{path}.channel", base.htron_channel),
                          L, r.num(d, "R_syn1_ohm", path, base.R_syn1),
                          r.num(d, "R_syn2_ohm", path, base.R_syn2),
                          r.num(d, "R_out_ohm", path, base.R_out),
                          r.num(d, "L_out_nH", path, base.L_out), ibh,
                          r.num(d, "beta", path, base.beta))
    except ConfigurationError as e:
        r.fail(str(e), path)
    return src, tgt, p


def network_to_dict(g: NetworkGraph, hw: HardwareDefaults = HardwareDefaults(),
                    neuron_form: str = "kcl") -> dict:
    neurons = []
    for n in g.neurons:
        p = n.params
        neurons.append({"id": n.id, "I_bias_uA": p.I_bias, "L1_nH": p.L1, "L2_nH": p.L2,
                        "R1_ohm": p.R1, "R2_ohm": p.R2, "control": _nanowire_dict(p.nw1),
                        "main": _nanowire_dict(p.nw2), "drive": drive_to_dict(n.drive)})
    syns = []
    for s in g.synapses:
        p = s.params
        syns.append({"source": s.source, "target": s.target, "I_bias_h_uA": p.I_bias_h,
                     "L_syn_nH": p.L_syn, "R_syn1_ohm": p.R_syn1, "R_syn2_ohm": p.R_syn2,
                     "R_out_ohm": p.R_out, "L_out_nH": p.L_out, "beta": p.beta,
                     "channel": _nanowire_dict(p.htron_channel)})
    return {"kind": "network", "neuron_form": neuron_form, "hardware": hardware_to_dict(hw),
            "neurons": neurons, "synapses": syns}


def _parse_network(r: _Reader, d: dict) -> ParsedDocument:
    r.check_keys(d, ("kind", "neuron_form", "hardware", "neurons", "synapses", "V", "E", "ids",
                     "drives", "L_syn_nH"), "")
    hw = _hardware(r, d)
    form = r.string(d, "neuron_form", "", "kcl", choices=NEURON_FORMS)
    g = NetworkGraph()
    if "V" in d:
        if "neurons" in d:
            r.fail("give either V or neurons, not both", "V")
        V = r.vector(d, "V", "")
        n = len(V)
        ids = r.ids(d, "", n)
        drives = r.obj(d.get("drives", {}), "drives")
        unknown = sorted(set(drives) - set(ids))
        if unknown:
            r.fail(f"drives for unknown neurons {unknown}", f"drives.{unknown[0]}")
        for k, nid in enumerate(ids):
            dr = _drive(r, drives[nid], f"drives.{nid}") if nid in drives else None
            g.add_neuron(*_neuron(r, {"id": nid, "I_bias_uA": V[k]}, f"V[{k}]", hw, dr))
        if "E" in d:
            E = r.matrix(d, "E", "", n)
            L = r.num(d, "L_syn_nH", "", hw.L_syn_for(0.02))
            for i in range(n):
                for j in range(n):
                    if E[i][j] != 0:
                        g.add_synapse(*_synapse(r, {"source": ids[j], "target": ids[i],
                                                    "I_bias_h_uA": E[i][j], "L_syn_nH": L},
                                                f"E[{i}][{j}]", hw))
    else:
        for key in ("E", "drives", "ids", "L_syn_nH"):
            if key in d:
                r.fail("only valid together with V", key)
        ns = d.get("neurons", [])
        if not isinstance(ns, list):
            r.fail("expected a list", "neurons")
        for k, nd in enumerate(ns):
            g.add_neuron(*_neuron(r, r.obj(nd, f"neurons[{k}]"), f"neurons[{k}]", hw))
    ss = d.get("synapses", [])
    if not isinstance(ss, list):
        r.fail("expected a list", "synapses")
    for k, sd in enumerate(ss):
        g.add_synapse(*_synapse(r, r.obj(sd, f"synapses[{k}]"), f"synapses[{k}]", hw))
    try:
        g.validate()
    except ValidationError as e:
        r.fail(str(e), "synapses")
    return ParsedDocument("network", g, hw, {"neuron_form": form},
                          network_to_dict(g, hw, form))


# algorithmic kinds --------------------------------------------------------------------

_LIF_PARAMS = (("lambda", 0.02), ("alpha", 0.67), ("u0", 0.95), ("eta", 1.0))


def _lif_params(r, d):
    return {k: r.num(d, k, "", v) for k, v in _LIF_PARAMS}


def _parse_lif(r: _Reader, d: dict) -> ParsedDocument:
    r.check_keys(d, ("kind", "hardware", "V", "E", "ids") + tuple(k for k, _ in _LIF_PARAMS), "")
    hw = _hardware(r, d)
    raw = d.get("V")
    if not isinstance(raw, list):
        r.fail("expected a list of inputs", "V")
    n = len(raw)
    I = [_drive(r, x, f"V[{k}]") if isinstance(x, dict) else r._scalar(x, f"V[{k}]")
         for k, x in enumerate(raw)]
    C = r.matrix(d, "E", "", n)
    ids = r.ids(d, "", n)
    lp = _lif_params(r, d)
    try:
        spec = LifSpec(np.array(C).reshape(n, n), I, lam=lp["lambda"], alpha=lp["alpha"],
                       u0=lp["u0"], eta=lp["eta"], ids=ids)
    except ConfigurationError as e:
        r.fail(str(e), "")
    doc = {"kind": "lif", "hardware": hardware_to_dict(hw), "ids": ids,
           "V": [x.to_dict() if isinstance(x, InputDrive) else x for x in I], "E": C, **lp}
    return ParsedDocument("lif", spec, hw, dict(lp), doc)


def _parse_compositional(r: _Reader, d: dict) -> ParsedDocument:
    r.check_keys(d, ("kind", "hardware", "gate_hardware", "V", "E", "ids", "inputs",
                     "temperature"), "")
    hw = _hardware(r, d)
    gh = _gate_hardware(r, d)
    b = r.vector(d, "V", "")
    n = len(b)
    w = r.matrix(d, "E", "", n)
    ids = r.ids(d, "", n)
    inputs = d.get("inputs", [])
    if not isinstance(inputs, list) or any(u not in ids for u in inputs):
        r.fail("inputs must list declared ids", "inputs")
    try:
        spec = CompositionalSpec({u: b[k] for k, u in enumerate(ids)},
                                 {(ids[j], ids[i]): w[i][j] for i in range(n) for j in range(n)
                                  if w[i][j] != 0},
                                 temperature=r.num(d, "temperature", "", 1.0),
                                 inputs=tuple(inputs))
    except ConfigurationError as e:
        r.fail(str(e), "")
    doc = {"kind": "compositional", "hardware": hardware_to_dict(hw),
           "gate_hardware": {k: getattr(gh, a) for a, k in GATE_HARDWARE_FIELDS.items()},
           "ids": ids, "V": b, "E": w, "inputs": list(spec.inputs),
           "temperature": spec.temperature}
    return ParsedDocument("compositional", spec, hw, {"gate_hardware": gh}, doc)


def _parse_linear(r: _Reader, d: dict) -> ParsedDocument:
    r.check_keys(d, ("kind", "hardware", "A", "b", "psd_hint", "horizon_T")
                 + tuple(k for k, _ in _LIF_PARAMS), "")
    hw = _hardware(r, d)
    b = r.vector(d, "b", "")
    A = r.matrix(d, "A", "", len(b))
    hint = r.string(d, "psd_hint", "", "already-psd", choices=("already-psd", "normalize"))
    lp = _lif_params(r, d)
    horizon = r.num(d, "horizon_T", "", 200.0)
    if not horizon > 0:
        r.fail("must be positive", "horizon_T")
    p = LinearProblem(A, b, hint)
    opts = dict(lp, horizon_T=horizon)
    doc = {"kind": "linear_problem", "hardware": hardware_to_dict(hw), "A": A, "b": b,
           "psd_hint": hint, **opts}
    return ParsedDocument("linear_problem", p, hw, opts, doc)


def _parse_gate(r: _Reader, d: dict) -> ParsedDocument:
    r.check_keys(d, ("kind", "hardware", "gate", "n_inputs", "delta", "pattern"), "")
    hw = _hardware(r, d)
    kind = r.string(d, "gate", "", "AND", choices=("AND", "OR"))
    n = r.integer(d, "n_inputs", "", 3)
    pat = d.get("pattern", [])
    if not isinstance(pat, list) or any(x not in (0, 1) or isinstance(x, float) for x in pat):
        r.fail("pattern must be a list of 0/1 integers", "pattern")
    try:
        g = GateSpec(kind, n, tuple(int(x) for x in pat), r.num(d, "delta", "", 0.1))
    except ConfigurationError as e:
        r.fail(str(e), "")
    doc = {"kind": "gate", "hardware": hardware_to_dict(hw), "gate": g.kind,
           "n_inputs": g.n_inputs, "delta": g.delta, "pattern": list(g.pattern)}
    return ParsedDocument("gate", g, hw, {}, doc)


def _parse_sweep(r: _Reader, d: dict) -> ParsedDocument:
    target = r.string(d, "target", "", choices=("firing_map", "synapse"))
    hw = _hardware(r, d)
    if target == "firing_map":
        r.check_keys(d, ("kind", "hardware", "target", "I_in_uA", "I_bias_uA", "rise_ns"), "")
        vals = {"I_in_uA": r.vector(d, "I_in_uA", ""), "I_bias_uA": r.vector(d, "I_bias_uA", ""),
                "rise_ns": r.num(d, "rise_ns", "", 5.0)}
    else:
        r.check_keys(d, ("kind", "hardware", "target", "spike_times_ns", "I_bias_h_uA",
                         "L_syn_nH", "sweep"), "")
        param = r.string(d, "sweep", "", choices=("L_syn_nH", "I_bias_h_uA"))
        vals = {"sweep": param, "spike_times_ns": r.vector(d, "spike_times_ns", "")}
        vals[param] = r.vector(d, param, "")
        other = "I_bias_h_uA" if param == "L_syn_nH" else "L_syn_nH"
        vals[other] = r.num(d, other, "", 27.0 if other == "I_bias_h_uA" else hw.L_syn_for(0.02))
    for k, v in vals.items():
        if isinstance(v, list) and not v:
            r.fail("must not be empty", k)
    doc = {"kind": "sweep", "hardware": hardware_to_dict(hw), "target": target, **vals}
    return ParsedDocument("sweep", SweepSpec(target, vals), hw, {}, doc)


_PARSERS = {"network": _parse_network, "lif": _parse_lif,
            "compositional": _parse_compositional, "linear_problem": _parse_linear,
            "gate": _parse_gate, "sweep": _parse_sweep}


def parse_network_document(text: str) -> ParsedDocument:
    """Parse and validate a document; errors name the offending field."""
    try:
        d = json.loads(text)
    except json.JSONDecodeError as e:
        raise DocumentError(e.msg, f"column {e.colno}", e.lineno) from None
    r = _Reader(text)
    r.obj(d, "")
    kind = r.string(d, "kind", "", choices=DOCUMENT_KINDS)
    return _PARSERS[kind](r, d)


def parse_document_dict(d: dict) -> ParsedDocument:
    return parse_network_document(json.dumps(d))


def serialize_document(p: ParsedDocument | dict) -> str:
    d = p.document if isinstance(p, ParsedDocument) else p
    return json.dumps(d, indent=2) + "\n"
