import numpy as np
import pytest

from nanosnn.apps import LinearProblem
from nanosnn.circuit import NeuronParams, SynapseParams
from nanosnn.drives import InputDrive
from nanosnn.network import NetworkGraph

# criterion number -> {part: (passed, detail)}; filled by test_acceptance.py
ACCEPTANCE = {}


def record(criterion: int, part: str, ok: bool, detail: str = "") -> bool:
    ACCEPTANCE.setdefault(criterion, {})[part] = (bool(ok), detail)
    return bool(ok)


def cycle_matrix(n: int = 5) -> np.ndarray:
    A = np.eye(n)
    for i in range(n):
        A[i, (i + 1) % n] = A[i, (i - 1) % n] = -0.5
    return A


TWO_BY_TWO = LinearProblem([[1.0, -0.5], [-0.5, 1.0]], [0.5, 3.5])
CYCLE = LinearProblem(cycle_matrix(), [-2.5, 0.0, 0.0, 0.0, 2.5])


def single_neuron(i_in: float, bias: float = 40.0, rise: float = 5.0) -> NetworkGraph:
    return NetworkGraph().add_neuron("a", NeuronParams.default(bias),
                                     InputDrive.constant(i_in, rise=rise))


def coupled_pair(i_a: float, ibh: float, i_b: float = 0.0) -> NetworkGraph:
    n = NeuronParams.default(40.0)
    return (NetworkGraph()
            .add_neuron("a", n, InputDrive.constant(i_a, rise=5.0))
            .add_neuron("b", n, InputDrive.constant(i_b, rise=5.0))
            .add_synapse("a", "b", SynapseParams.default(ibh)))


@pytest.fixture
def two_by_two():
    return TWO_BY_TWO


@pytest.fixture
def cycle():
    return CYCLE


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[k]
        ok = all(v[0] for v in parts.values())
        text = "; ".join(f"{name}{'' if good else ' [not met]'}: {detail}"
                         for name, (good, detail) in parts.items())
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {text}")
