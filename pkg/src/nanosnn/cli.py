"""Command-line entry point.

    nanosnn simulate  --input net.json   --out run/
    nanosnn solve     --input eq.json    --out run/
    nanosnn gate      --input and3.json  --out run/
    nanosnn sweep     --input sweep.json --out run/
    nanosnn translate --input lif.json   --out run/

Exit status: 0 success, 2 malformed input, 3 simulation failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import documents
from .analysis import firing_rates, sweep_firing_map, sweep_synapse, decay_time
from .apps import evaluate_gate, solve_linear, truth
from .errors import ChatterError, ConfigurationError, DivergenceError, ValidationError
from .integrator import IntegratorConfig, SimulationTrace, run_network
from .translator import check_realizability, from_compositional, from_lif

# re-exported: the parser is part of the command-line surface
parse_network_document = documents.parse_network_document
serialize_document = documents.serialize_document

COMMANDS = ("simulate", "solve", "gate", "sweep", "translate")
EXIT_OK, EXIT_INPUT, EXIT_SIM = 0, 2, 3


@dataclass(frozen=True)
class RunConfig:
    command: str
    input: str
    out: str = "out"
    t_end_ns: float | None = None
    tol: float | None = None              # relative tolerance; abs tol follows at 10x
    seed: int = 0
    workers: int = 1
    noise_sigma_uA: float = 0.0
    fixed_step_oracle: bool = False
    oracle_dt_ns: float = 1e-3
    paper_eq5_literal: bool = False
    record_dt_ns: float | None = None
    rate_dt_ns: float | None = None

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigurationError(f"unknown command {self.command!r}")
        if self.workers < 1:
            raise ConfigurationError("worker count must be at least 1")
        if self.t_end_ns is not None and not self.t_end_ns > 0:
            raise ConfigurationError("--t-end-ns must be positive")
        if self.tol is not None and not self.tol > 0:
            raise ConfigurationError("--tol must be positive")

    @property
    def neuron_form(self) -> str:
        return "printed" if self.paper_eq5_literal else "kcl"

    @property
    def oracle_dt(self) -> float | None:
        return self.oracle_dt_ns if self.fixed_step_oracle else None

    def integrator(self, t_end: float, record_dt: float = 0.0) -> IntegratorConfig:
        cfg = IntegratorConfig(t_end=self.t_end_ns or t_end, seed=self.seed,
                               noise_sigma=self.noise_sigma_uA,
                               record_dt=self.record_dt_ns if self.record_dt_ns is not None
                               else record_dt)
        if self.tol is not None:
            cfg = replace(cfg, rel_tol=self.tol, abs_tol=10 * self.tol)
        return cfg


# output writers ---------------------------------------------------------------

def _f(x) -> str:
    return repr(float(x))


def _unit(label: str) -> str:
    return label + ("_uA" if label.rsplit(".", 1)[-1].startswith("i") else "")


def write_trace(path: Path, tr: SimulationTrace):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t_ns"] + [_unit(s) for s in tr.state_labels] + tr.flag_labels)
        for t, y, f in zip(tr.times, tr.states, tr.flags):
            w.writerow([_f(t)] + [_f(v) for v in y] + [str(int(v)) for v in f])


def write_spikes(path: Path, tr: SimulationTrace):
    rows = sorted((float(t), nid) for nid in tr.neuron_ids for t in tr.spikes(nid))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["neuron_id", "t_ns"])
        for t, nid in rows:
            w.writerow([nid, _f(t)])


def write_rates(path: Path, tr: SimulationTrace, sample_dt: float):
    rs = firing_rates(tr, sample_dt)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        head = ["t_ns"]
        for nid in rs.neuron_ids:
            head += [f"N_{nid}", f"rate_{nid}_per_ns"]
        w.writerow(head)
        for k, t in enumerate(rs.times):
            row = [_f(t)]
            for j in range(len(rs.neuron_ids)):
                row += [str(int(rs.counts[k, j])), _f(rs.rates[k, j])]
            w.writerow(row)


def _write_json(path: Path, obj):
    path.write_text(json.dumps(obj, indent=2) + "\n")


def _write_run(out: Path, tr: SimulationTrace, rate_dt: float):
    write_trace(out / "trace.csv", tr)
    write_spikes(out / "spikes.csv", tr)
    write_rates(out / "rates.csv", tr, rate_dt)


# commands -----------------------------------------------------------------------

def _as_network(doc: documents.ParsedDocument):
    if doc.kind == "network":
        return doc.value
    if doc.kind == "lif":
        return from_lif(doc.value, doc.hardware)
    if doc.kind == "compositional":
        return from_compositional(doc.value, doc.hardware, doc.options["gate_hardware"])
    raise ValidationError(f"cannot build a network from a {doc.kind!r} document", ["kind"])


def _cmd_simulate(cfg: RunConfig, doc, out: Path) -> dict:
    g = _as_network(doc)
    form = doc.options.get("neuron_form", "kcl") if doc.kind == "network" else "kcl"
    if cfg.paper_eq5_literal:
        form = "printed"
    default_t = 200 * doc.hardware.timescale if doc.kind == "lif" else 1000.0
    icfg = cfg.integrator(default_t)
    tr = run_network(g, icfg, form, cfg.oracle_dt)
    _write_run(out, tr, cfg.rate_dt_ns or doc.hardware.timescale)
    return {"spike_counts": tr.spike_counts(), "t_end_ns": icfg.t_end,
            "neuron_form": form, "method": "euler" if cfg.oracle_dt else "dopri5"}


def _cmd_solve(cfg: RunConfig, doc, out: Path) -> dict:
    if doc.kind != "linear_problem":
        raise ValidationError("solve needs a linear_problem document", ["kind"])
    o = doc.options
    T = doc.hardware.timescale
    horizon = cfg.t_end_ns / T if cfg.t_end_ns else o["horizon_T"]
    icfg = cfg.integrator(horizon * T, T / 4)
    res = solve_linear(doc.value, doc.hardware, icfg, lam=o["lambda"], alpha=o["alpha"],
                       u0=o["u0"], eta=o["eta"], horizon=horizon,
                       neuron_form=cfg.neuron_form, oracle_dt=cfg.oracle_dt)
    _write_run(out, res.trace, cfg.rate_dt_ns or T)
    report = res.to_dict()
    _write_json(out / "solution.json", report)
    return {"x_hat": report["x_hat"], "rate_ratios": report["rate_ratios"]}


def _cmd_gate(cfg: RunConfig, doc, out: Path) -> dict:
    if doc.kind != "gate":
        raise ValidationError("gate needs a gate document", ["kind"])
    g = doc.value
    icfg = cfg.integrator(1000.0, 1.0)
    rows = evaluate_gate(g, icfg, doc.hardware, cfg.workers,
                         [g.pattern] if g.pattern else None, cfg.neuron_form, cfg.oracle_dt)
    with open(out / "truth_table.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        n = g.n_inputs
        w.writerow([f"in{k + 1}" for k in range(n)] + ["out", "expected"]
                   + [f"in{k + 1}_fired" for k in range(n)] + ["out_spikes"])
        for r in rows:
            w.writerow(list(r.pattern) + [r.output, truth(g.kind, r.pattern)]
                       + list(r.inputs_fired) + [r.spike_counts["out"]])
    ok = all(r.output == truth(g.kind, r.pattern) for r in rows)
    return {"gate": g.kind, "rows": len(rows), "matches_logic": ok}


def _cmd_sweep(cfg: RunConfig, doc, out: Path) -> dict:
    if doc.kind != "sweep":
        raise ValidationError("sweep needs a sweep document", ["kind"])
    v = doc.value.values
    hw = doc.hardware
    if doc.value.target == "firing_map":
        icfg = cfg.integrator(400.0)
        rates = sweep_firing_map(hw.neuron(0.0), v["I_in_uA"], v["I_bias_uA"], icfg,
                                 v["rise_ns"], cfg.workers)
        with open(out / "sweep.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["I_in_uA", "I_bias_uA", "rate_per_ns"])
            for a, ia in enumerate(v["I_in_uA"]):
                for b, ib in enumerate(v["I_bias_uA"]):
                    w.writerow([_f(ia), _f(ib), _f(rates[a, b])])
        return {"cells": int(rates.size)}
    spikes = v["spike_times_ns"]
    icfg = cfg.integrator(max(spikes) + 1500.0, 0.5)
    param = v["sweep"]
    ibh, L = v["I_bias_h_uA"], v["L_syn_nH"]
    base = hw.synapse(ibh if param == "L_syn_nH" else ibh[0],
                      L if param == "I_bias_h_uA" else L[0])
    kw = {"L_syn": v[param]} if param == "L_syn_nH" else {"I_bias_h": v[param]}
    resp = sweep_synapse(base, spikes, cfg=icfg, workers=cfg.workers, **kw)
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([param, "decay_time_ns", "peak_abs_i3_uA", "peak_i5_uA", "min_i5_uA"])
        for r in resp:
            w.writerow([_f(r.value), _f(decay_time(r)), _f(np.max(np.abs(r.i3))),
                        _f(np.max(r.i5)), _f(np.min(r.i5))])
    return {"cells": len(resp)}


def _cmd_translate(cfg: RunConfig, doc, out: Path) -> dict:
    if doc.kind == "linear_problem":
        from .apps import solver_network
        o = doc.options
        g = solver_network(doc.value, doc.hardware, o["lambda"], o["alpha"], o["u0"], o["eta"])
    elif doc.kind == "gate":
        from .apps import build_gate
        g = build_gate(doc.value, doc.hardware)
    else:
        g = _as_network(doc)
    (out / "network.json").write_text(
        documents.serialize_document(documents.network_to_dict(g, doc.hardware,
                                                               cfg.neuron_form)))
    rep = check_realizability(g)
    _write_json(out / "realizability.json",
                {"ok": rep.ok, "violations": rep.violations, "max_L_syn_nH": rep.max_L_syn,
                 "squares": rep.squares})
    return {"neurons": len(g.neurons), "synapses": len(g.synapses), "realizable": rep.ok}


_DISPATCH = {"simulate": _cmd_simulate, "solve": _cmd_solve, "gate": _cmd_gate,
             "sweep": _cmd_sweep, "translate": _cmd_translate}


def run(cfg: RunConfig) -> int:
    try:
        text = Path(cfg.input).read_text()
    except OSError as e:
        print(f"error: cannot read {cfg.input}: {e.strerror}", file=sys.stderr)
        return EXIT_INPUT
    try:
        doc = documents.parse_network_document(text)
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        summary = _DISPATCH[cfg.command](cfg, doc, out)
    except (ValidationError, ConfigurationError) as e:
        print(f"error: {cfg.input}: {e}", file=sys.stderr)
        return EXIT_INPUT
    except (DivergenceError, ChatterError) as e:
        print(f"error: simulation failed: {e}", file=sys.stderr)
        return EXIT_SIM
    summary = {"command": cfg.command, **summary}
    print(json.dumps(summary))
    return EXIT_OK


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nanosnn", description=__doc__.split("\n\n")[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--input", required=True, help="input document (JSON)")
    ap.add_argument("--out", default="out", help="output directory")
    ap.add_argument("--t-end-ns", type=float)
    ap.add_argument("--tol", type=float, help="relative tolerance (absolute: 10x, in uA)")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--noise-sigma-uA", type=float, default=0.0, dest="noise_sigma_uA")
    ap.add_argument("--fixed-step-oracle", action="store_true",
                    help="forward Euler instead of the adaptive integrator")
    ap.add_argument("--oracle-dt-ns", type=float, default=1e-3)
    ap.add_argument("--paper-eq5-literal", action="store_true",
                    help="use the asymmetric \"printed\" neuron form")
    ap.add_argument("--record-dt-ns", type=float)
    ap.add_argument("--rate-dt-ns", type=float)
    return ap


def main(argv=None) -> int:
    a = _parser().parse_args(argv)
    try:
        cfg = RunConfig(a.command, a.input, a.out, a.t_end_ns, a.tol, a.seed, a.workers,
                        a.noise_sigma_uA, a.fixed_step_oracle, a.oracle_dt_ns,
                        a.paper_eq5_literal, a.record_dt_ns, a.rate_dt_ns)
    except ConfigurationError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
