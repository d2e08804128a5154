import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from conftest import CYCLE, TWO_BY_TWO, single_neuron
from nanosnn.analysis import (best_scale_deviation, calibrate_scale, decay_time,
                              firing_rates, late_rates, lsq_error, spike_period,
                              sweep_firing_map, sweep_period, sweep_synapse, window_rates)
from nanosnn.circuit import NeuronParams, SynapseParams
from nanosnn.errors import ConfigurationError
from nanosnn.integrator import IntegratorConfig, SimulationTrace, simulate


def fake_trace(spikes: dict, t_end: float) -> SimulationTrace:
    ev = {k: np.asarray(v, float) for k, v in spikes.items()}
    return SimulationTrace(np.array([0.0, t_end]), np.zeros((2, 0)), np.zeros((2, 0)),
                           ev, [], neuron_ids=tuple(ev), t_end=t_end)


class TestFiringRates:
    def test_count_over_time(self):
        r = firing_rates(fake_trace({"a": [10, 20, 30]}, 30.0), 10.0)
        assert np.allclose(r.rates[:, 0], 0.1)
        assert list(r.counts[:, 0]) == [1, 2, 3]

    def test_silent(self):
        r = firing_rates(fake_trace({"a": []}, 50.0), 5.0)
        assert not r.rates.any()

    def test_rate_times_t_is_count(self):
        tr = simulate(single_neuron(26.0), IntegratorConfig(t_end=300.0))
        r = firing_rates(tr, 7.0)
        assert np.allclose(r.rates * r.times[:, None], r.counts, rtol=1e-15, atol=0)
        assert np.all(np.diff(r.counts, axis=0) >= 0)

    def test_resampling_invariance(self):
        g = single_neuron(26.0)
        a = simulate(g, IntegratorConfig(t_end=300.0, record_dt=0.0))
        b = simulate(g, IntegratorConfig(t_end=300.0, record_dt=3.0))
        ra, rb = firing_rates(a, 5.0), firing_rates(b, 10.0)
        assert np.array_equal(ra.rates[1::2], rb.rates)

    def test_normalized(self):
        r = firing_rates(fake_trace({"a": [1.0]}, 2.0), 1.0, timescale=37.0)
        assert r.normalized()[-1, 0] == pytest.approx(18.5)
        with pytest.raises(ConfigurationError):
            firing_rates(fake_trace({"a": []}, 2.0), 1.0).normalized()

    def test_windows(self):
        tr = fake_trace({"a": [1, 2, 3, 60, 70], "b": [80]}, 100.0)
        assert list(window_rates(tr, 0.0, 10.0)) == [0.3, 0.0]
        assert list(late_rates(tr)) == [0.04, 0.02]


class TestLsqError:
    def test_exact_two_by_two(self):
        assert lsq_error(TWO_BY_TWO.A, TWO_BY_TWO.b, [3.0, 5.0]) == pytest.approx(0.0, abs=1e-15)

    def test_zero_guess(self):
        assert lsq_error(TWO_BY_TWO.A, TWO_BY_TWO.b, [0.0, 0.0]) == 1.0

    def test_cycle_solution(self):
        assert lsq_error(CYCLE.A, CYCLE.b, [0, 1, 2, 3, 4]) == pytest.approx(0.0, abs=1e-15)

    def test_sign_flipped_last_rhs_entry_is_inconsistent(self):
        flipped = [-2.5, 0.0, 0.0, 0.0, -2.5]
        assert lsq_error(CYCLE.A, flipped, [0, 1, 2, 3, 4]) > 0.5

    def test_zero_rhs(self):
        with pytest.raises(ValueError):
            lsq_error(np.eye(2), [0.0, 0.0], [1.0, 1.0])

    @given(arrays(float, (3, 3), elements=st.floats(-5, 5)),
           arrays(float, 3, elements=st.floats(-5, 5)),
           arrays(float, 3, elements=st.floats(-5, 5)),
           st.floats(0.1, 10.0) | st.floats(-10.0, -0.1))
    def test_joint_scaling_invariance(self, A, b, x, s):
        if np.linalg.norm(b) < 1e-3:
            return
        assert lsq_error(s * A, s * b, x) == pytest.approx(lsq_error(A, b, x), rel=1e-9,
                                                           abs=1e-12)

    @given(arrays(float, (2, 2), elements=st.floats(-5, 5)),
           arrays(float, 2, elements=st.floats(-5, 5)))
    def test_zero_iff_solution(self, A, x):
        b = A @ x
        if np.linalg.norm(b) < 1e-3:
            return
        assert lsq_error(A, b, x) < 1e-12
        assert lsq_error(A, b, x + 1.0) > 0 or np.allclose(A @ np.ones(2), 0)


def test_calibrate_scale():
    assert calibrate_scale(np.eye(2), [2.0, 4.0], [1.0, 2.0]) == pytest.approx(2.0)
    assert calibrate_scale(np.eye(2), [2.0, 4.0], [0.0, 0.0]) == 0.0


def test_best_scale_deviation():
    s, dev = best_scale_deviation([0.0, 1.1, 1.9, 3.0], [0, 1, 2, 3])
    assert dev[0] == 0.0
    # equal and opposite extreme deviations: (q_max - q_min) / (q_max + q_min)
    assert np.max(np.abs(dev)) == pytest.approx(0.15 / 2.05)
    assert dev.max() == pytest.approx(-dev.min())
    assert best_scale_deviation([0.0, 0.0, 1.0], [0, 1, 2])[0] == 0.0


def test_spike_period():
    assert spike_period(np.array([0, 1, 3, 5, 7.0]), skip=2) == 2.0
    assert spike_period(np.array([1.0])) == np.inf


class TestFiringSweeps:
    p = NeuronParams.default()

    def test_subthreshold_cell_silent(self):
        assert sweep_firing_map(self.p, [5.0], [20.0])[0, 0] == 0.0

    def test_rate_increases_with_input(self):
        r = sweep_firing_map(self.p, [19.0, 21.0, 24.0, 28.0, 33.0], [40.0], workers=2)[:, 0]
        assert r[0] == 0.0
        assert np.all(np.diff(r) > 0)

    def test_rate_nondecreasing_with_bias(self):
        r = sweep_firing_map(self.p, [26.0], np.arange(34.0, 57.0, 2.0), workers=2)[0]
        assert np.all(np.diff(r) >= 0)
        assert r[-1] > r[0]

    def test_workers_do_not_change_results(self):
        a = sweep_firing_map(self.p, [22.0, 30.0], [40.0, 45.0], workers=1)
        b = sweep_firing_map(self.p, [22.0, 30.0], [40.0, 45.0], workers=3)
        assert np.array_equal(a, b)

    def test_period_strictly_decreasing(self):
        T = sweep_period(self.p, [21, 22, 24, 26, 28, 30, 33, 36], 40.0, workers=2)
        assert np.all(np.isfinite(T)) and np.all(np.diff(T) < 0)


class TestSynapseSweeps:
    spikes = [50.0, 90.0, 130.0]
    base = SynapseParams.default(27.0)

    def test_decay_ordered_with_loop_inductance(self):
        rs = sweep_synapse(self.base, self.spikes, L_syn=[250, 500, 1000, 2000], workers=2)
        assert all(len(r.spikes) == 3 for r in rs)
        d = [decay_time(r) for r in rs]
        assert np.all(np.diff(d) > 0)

    def test_output_peak_ordered_with_bias(self):
        rs = sweep_synapse(self.base, self.spikes, I_bias_h=[5, 10, 27, 40])
        peaks = [np.max(np.abs(r.i5)) for r in rs]
        assert np.all(np.diff(peaks) > 0)

    def test_negated_bias_negates_output(self):
        a, b = sweep_synapse(self.base, self.spikes, I_bias_h=[27.0, -27.0])
        scale = np.max(np.abs(a.i5))
        assert np.max(np.abs(a.i5 + np.interp(a.times, b.times, b.i5))) < 0.01 * scale

    def test_unbiased_synapse_outputs_nothing(self):
        (r,) = sweep_synapse(self.base, self.spikes, I_bias_h=[0.0])
        assert len(r.spikes) == 3
        assert not np.any(r.i5)

    def test_sweep_exactly_one_parameter(self):
        with pytest.raises(ConfigurationError):
            sweep_synapse(self.base, self.spikes)
        with pytest.raises(ConfigurationError):
            sweep_synapse(self.base, self.spikes, L_syn=[1.0], I_bias_h=[1.0])
