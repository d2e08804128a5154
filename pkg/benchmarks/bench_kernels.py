"""Compiled kernel vs. pure-Python kernel on the same networks.

    python3 benchmarks/bench_kernels.py [--repeat 3]
"""

import argparse
import time

import numpy as np

from nanosnn import IntegratorConfig, LinearProblem
from nanosnn.apps import GateSpec, build_gate, solver_network
from nanosnn.integrator import KERNELS, simulate


def cases():
    A = np.eye(5)
    for i in range(5):
        A[i, (i + 1) % 5] = A[i, (i - 1) % 5] = -0.5
    yield "2x2 solver, 20 T", solver_network(LinearProblem([[1, -0.5], [-0.5, 1]], [0.5, 3.5])), 740.0
    yield "cycle solver, 20 T", solver_network(LinearProblem(A, [-2.5, 0, 0, 0, 2.5])), 740.0
    yield "AND gate 111", build_gate(GateSpec("AND", 3), pattern=(1, 1, 1)), 300.0


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    a = ap.parse_args()
    if "compiled" not in KERNELS:
        print("compiled kernel not built; only the Python kernel is available")
    print(f"{'case':<22}{'backend':<10}{'best s':>10}{'spikes':>8}")
    for name, g, t_end in cases():
        cfg = IntegratorConfig(t_end=t_end)
        best = {}
        for backend in KERNELS:
            ts = []
            for _ in range(a.repeat):
                t0 = time.perf_counter()
                tr = simulate(g, cfg, backend=backend)
                ts.append(time.perf_counter() - t0)
            best[backend] = min(ts)
            n = sum(tr.spike_counts().values())
            print(f"{name:<22}{backend:<10}{best[backend]:>10.4f}{n:>8}")
        if len(best) == 2:
            print(f"{'':<22}speedup {best['python'] / best['compiled']:.0f}x")


if __name__ == "__main__":
    main()
