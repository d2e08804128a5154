from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nanosnn.apps import GateSpec, build_gate, gate_spec_compositional, gate_hardware
from nanosnn.circuit import SynapseParams
from nanosnn.errors import ConfigurationError, RealizabilityError
from nanosnn.integrator import IntegratorConfig, simulate
from nanosnn.network import NetworkGraph
from nanosnn.translator import (CompositionalSpec, HardwareDefaults, LifSpec,
                                RealizabilityLimits, check_realizability, from_compositional,
                                from_lif, gate_probability, gate_weight, lambda_from_hardware,
                                ramp_rate)

HW = HardwareDefaults()


class TestLif:
    def test_leak_sets_loop_inductance(self):
        g = from_lif(LifSpec([[1.0, 0.5], [0.5, 1.0]], [1.0, 1.0], lam=0.02))
        assert {s.params.L_syn for s in g.synapses} == {1000.0}

    def test_initial_potential_sets_bias(self):
        g = from_lif(LifSpec([[0.0]], [0.0], u0=0.95))
        p = g.neurons[0].params
        assert p.I_bias == pytest.approx(57.0)
        assert p.quiescent_main == pytest.approx(28.5)
        assert p.nw2.I_c == 30.0

    def test_zero_matrix_has_no_synapses(self):
        assert not from_lif(LifSpec(np.zeros((3, 3)), [0.0] * 3)).synapses

    @given(st.floats(1e-3, 10.0))
    def test_lambda_round_trip(self, lam):
        g = from_lif(LifSpec([[1.0]], [1.0], lam=lam))
        assert lambda_from_hardware(g.neurons[0].params, g.synapses[0].params) == \
            pytest.approx(lam, rel=1e-15)

    def test_inputs_become_ramps(self):
        g = from_lif(LifSpec([[0.0, 0.0], [0.0, 0.0]], [2.0, -1.0]))
        d0, d1 = (n.drive for n in g.neurons)
        assert d0.kind == "linear-ramp"
        assert d0.ramp_rate == pytest.approx(2 * HW.input_unit / HW.timescale)
        assert d1.ramp_rate == pytest.approx(-ramp_rate(1.0, HW))

    def test_negative_ramp_cap(self):
        hw = replace(HW, negative_ramp_cap=5.0)
        d = from_lif(LifSpec([[0.0]], [-1.0]), hw).neurons[0].drive
        assert d.value(1e9) == pytest.approx(-5.0)

    def test_sign_fidelity(self):
        """C > 0 inhibits and C < 0 excites: the output current of the emitted
        synapse has the opposite sign of C after one source spike."""
        for c, sign in ((0.5, -1.0), (-0.5, 1.0)):
            g = from_lif(LifSpec([[0.0, 0.0], [c, 0.0]], [30.0, 0.0]))
            tr = simulate(g, IntegratorConfig(t_end=400.0))
            assert len(tr.spikes("n1")) >= 1
            i5 = tr.column("syn0(n1->n2).i5")
            assert np.sign(i5[np.argmax(np.abs(i5))]) == sign

    @given(st.floats(0.1, 3.0))
    def test_scale_equivariance(self, s):
        C = np.array([[0.0, 0.3], [-0.2, 0.1]])
        a = from_lif(LifSpec(C, [0.0, 0.0]))
        b = from_lif(LifSpec(s * C, [0.0, 0.0]))
        for x, y in zip(a.synapses, b.synapses):
            assert y.params.I_bias_h == pytest.approx(s * x.params.I_bias_h, rel=1e-12)

    def test_htron_limit(self):
        hw = replace(HW, htron_ic_max=100.0)
        with pytest.raises(RealizabilityError):
            from_lif(LifSpec([[0.0, 1.0], [1.0, 0.0]], [0.0, 0.0]), hw)

    @pytest.mark.parametrize("kw", [dict(lam=0.0), dict(u0=1.0), dict(I=[1.0])])
    def test_invalid_spec(self, kw):
        args = dict(C=[[1.0, 0.0], [0.0, 1.0]], I=[0.0, 0.0])
        args.update(kw)
        with pytest.raises(ConfigurationError):
            LifSpec(**args)

    def test_hardware_must_be_positive(self):
        with pytest.raises(ConfigurationError):
            HardwareDefaults(R_syn1=0.0)


class TestCompositional:
    def _currents(self, kind):
        g = build_gate(GateSpec(kind, 3, delta=0.1))
        return (sorted({round(s.params.I_bias_h, 9) for s in g.synapses}),
                {n.id: n.params.I_bias for n in g.neurons})

    def test_and_gate_currents(self):
        syn, bias = self._currents("AND")
        assert syn == [27.0]
        assert [bias[f"in{k}"] for k in (1, 2, 3)] == [58.0] * 3
        assert bias["out"] == pytest.approx(54.6, abs=1e-9)

    def test_or_gate_output_bias(self):
        syn, bias = self._currents("OR")
        assert syn == [27.0]
        assert bias["out"] == pytest.approx(57.0, abs=1e-9)
        assert bias["in1"] == 58.0

    def test_all_nanowires_at_30uA(self):
        g = build_gate(GateSpec("AND", 3))
        assert {n.params.nw2.I_c for n in g.neurons} == {30.0}

    def test_empty_graph(self):
        g = from_compositional(CompositionalSpec({}, {}))
        assert not g.neurons and not g.synapses

    def test_weight_on_undeclared_edge(self):
        with pytest.raises(ConfigurationError):
            CompositionalSpec({"a": 0.0}, {("a", "b"): 1.0})

    def test_temperature_positive(self):
        with pytest.raises(ConfigurationError):
            CompositionalSpec({"a": 0.0}, {}, temperature=0.0)

    def test_inputs_inferred_from_topology(self):
        spec = gate_spec_compositional(GateSpec("AND", 2))
        assert spec.inputs == ("in1", "in2")
        assert gate_hardware(GateSpec("AND", 2)).weight_unit == gate_weight(0.1)


class TestGateProbability:
    @pytest.mark.parametrize("delta", [0.01, 0.1, 0.3])
    def test_identities(self, delta):
        L = gate_weight(delta)
        b = 2.5 * L
        assert gate_probability(3, L, b, 3) == pytest.approx(1 - delta, rel=1e-12)
        assert gate_probability(2, L, b, 3) == pytest.approx(delta, rel=1e-12)

    def test_numeric_values(self):
        L = gate_weight(0.1)
        assert L == pytest.approx(4.394, abs=1e-3)
        assert 2.5 * L == pytest.approx(10.986, abs=1e-3)
        assert gate_probability(3, L, 2.5 * L) == pytest.approx(0.9)

    @given(st.floats(0.01, 20.0), st.floats(-50.0, 50.0), st.integers(0, 9))
    def test_increasing_in_firing_inputs(self, L, b, n):
        lo, hi = gate_probability(n, L, b), gate_probability(n + 1, L, b)
        assert hi >= lo
        # strict until the float sigmoid saturates just below 1
        if lo < 1.0 - 1e-9:
            assert hi > lo

    def test_out_of_range(self):
        with pytest.raises(ConfigurationError):
            gate_probability(4, 1.0, 1.0, 3)
        with pytest.raises(ConfigurationError):
            gate_weight(0.5)


class TestRealizability:
    def _one_synapse(self, ibh, ic):
        return (NetworkGraph().add_neuron("a", HW.neuron(40.0)).add_neuron("b", HW.neuron(40.0))
                .add_synapse("a", "b", SynapseParams.default(ibh, I_c_h=ic)))

    def test_squares_for_one_microhenry(self):
        r = check_realizability(self._one_synapse(27.0, 30.0))
        assert r.squares["NbN"] == pytest.approx(30303, abs=1)
        assert r.squares["WSi"] == pytest.approx(1000e3 / 260.0)

    def test_bias_below_channel_critical_passes(self):
        assert check_realizability(self._one_synapse(27.0, 30.0)).ok

    def test_bias_above_channel_critical_flagged(self):
        r = check_realizability(self._one_synapse(31.0, 30.0))
        assert not r.ok
        assert "I_bias_h" in r.violations[0]

    def test_limits(self):
        lim = RealizabilityLimits(max_critical_current=20.0)
        r = check_realizability(self._one_synapse(27.0, 30.0), lim)
        assert len(r.violations) == 5
        assert "neuron a: main nanowire" in r.violations[2]
