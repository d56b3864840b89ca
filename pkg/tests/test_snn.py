"""Spiking neuron: kernel, dynamics, peak localisation, learning."""
import math

import numpy as np
import pytest

from qsnn import snn
from qsnn.quip import UnsignedProductError

PARAMS = snn.NeuronParams(tau=15.0, tau_s=3.75, v_thr=1.0, T=200.0)


def random_config(rng, params=PARAMS, synapses=5, max_spikes=6, positive=True):
    n_spikes = int(rng.integers(1, max_spikes + 1))
    spikes = tuple(
        (int(rng.integers(0, synapses)), float(rng.uniform(0.0, params.T * 0.4)))
        for _ in range(n_spikes)
    )
    if positive:
        weights = rng.uniform(0.2, 1.0, synapses)
    else:
        weights = rng.normal(0.3, 0.5, synapses)
    return snn.SpikeConfig(synapses, spikes, weights)


def grid_argmax(config, params, prefix, points=100_001):
    moments, weights = snn.sorted_spikes(config)
    lo = moments[prefix - 1]
    grid = np.linspace(lo, params.T, points)
    values = (
        weights[:prefix, None] * snn.kernel(grid[None, :] - moments[:prefix, None], params)
    ).sum(axis=0)
    return float(grid[int(np.argmax(values))])


class TestKernel:
    def test_zero_at_zero(self):
        assert snn.kernel(0.0, PARAMS) == 0.0

    def test_decays_to_zero(self):
        assert snn.kernel(1e4, PARAMS) == pytest.approx(0.0, abs=1e-12)

    def test_causal(self):
        assert snn.kernel(-3.0, PARAMS) == 0.0

    def test_positive_in_between(self):
        assert snn.kernel(5.0, PARAMS) > 0.0

    def test_argmax_matches_closed_form(self):
        grid = np.linspace(0.0, 100.0, 1_000_001)
        values = snn.kernel(grid, PARAMS)
        peak = grid[int(np.argmax(values))]
        assert peak == pytest.approx(snn.kernel_peak_offset(PARAMS), abs=1e-4)


class TestPotential:
    def test_rest_before_spikes(self):
        config = snn.SpikeConfig(2, ((0, 50.0),), np.array([1.0, 0.5]))
        params = snn.NeuronParams(tau=15.0, tau_s=3.75, v_thr=1.0, T=200.0, v_rest=-0.2)
        assert snn.potential(10.0, config, params) == -0.2

    def test_single_spike_is_kernel(self):
        config = snn.SpikeConfig(1, ((0, 20.0),), np.array([1.0]))
        for t in (25.0, 40.0, 80.0):
            assert snn.potential(t, config, PARAMS) == pytest.approx(
                float(snn.kernel(t - 20.0, PARAMS))
            )

    def test_superposition(self):
        config = snn.SpikeConfig(2, ((0, 10.0), (1, 30.0)), np.array([0.7, 1.3]))
        single0 = snn.SpikeConfig(2, ((0, 10.0),), np.array([0.7, 1.3]))
        single1 = snn.SpikeConfig(2, ((1, 30.0),), np.array([0.7, 1.3]))
        for t in np.linspace(0.0, 150.0, 40):
            combined = snn.potential(t, config, PARAMS)
            split = snn.potential(t, single0, PARAMS) + snn.potential(t, single1, PARAMS)
            assert combined == pytest.approx(split, abs=1e-12)

    def test_linear_in_weights(self):
        rng = np.random.default_rng(61)
        for _ in range(10):
            config = random_config(rng, positive=False)
            other = snn.with_weights(config, rng.normal(size=config.synapse_count))
            both = snn.with_weights(config, config.weights + other.weights)
            t = float(rng.uniform(0.0, PARAMS.T))
            assert snn.potential(t, both, PARAMS) == pytest.approx(
                snn.potential(t, config, PARAMS) + snn.potential(t, other, PARAMS),
                abs=1e-10,
            )

    def test_causality_ignores_future_spikes(self):
        early = snn.SpikeConfig(2, ((0, 10.0),), np.array([1.0, 1.0]))
        with_future = snn.SpikeConfig(2, ((0, 10.0), (1, 90.0)), np.array([1.0, 1.0]))
        for t in np.linspace(0.0, 89.9, 25):
            assert snn.potential(t, early, PARAMS) == snn.potential(t, with_future, PARAMS)


class TestDerivative:
    def test_zero_at_closed_form_moment(self):
        rng = np.random.default_rng(62)
        for _ in range(10):
            config = random_config(rng)
            prefix = len(config.spikes)
            t_star, _ = snn.local_max_moment(prefix, config, PARAMS, snn.exact_provider())
            assert abs(snn.potential_derivative(t_star, prefix, config, PARAMS)) <= 1e-8

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(63)
        h = 1e-5
        for _ in range(10):
            config = random_config(rng, positive=False)
            prefix = len(config.spikes)
            moments, _ = snn.sorted_spikes(config)
            t = float(moments[-1] + rng.uniform(1.0, 30.0))
            num = (
                snn.prefix_potential(t + h, config, PARAMS, prefix)
                - snn.prefix_potential(t - h, config, PARAMS, prefix)
            ) / (2 * h)
            analytic = snn.potential_derivative(t, prefix, config, PARAMS)
            assert analytic == pytest.approx(num, rel=1e-6, abs=1e-9)

    def test_single_spike_stationary_at_peak(self):
        config = snn.SpikeConfig(1, ((0, 12.0),), np.array([1.0]))
        t_peak = 12.0 + snn.kernel_peak_offset(PARAMS)
        assert abs(snn.potential_derivative(t_peak, 1, config, PARAMS)) <= 1e-12


class TestLocalMaxMoment:
    def test_single_spike_closed_form(self):
        config = snn.SpikeConfig(1, ((0, 17.0),), np.array([1.0]))
        t_star, in_window = snn.local_max_moment(1, config, PARAMS, snn.exact_provider())
        assert t_star == pytest.approx(17.0 + snn.kernel_peak_offset(PARAMS), abs=1e-10)
        assert in_window

    def test_matches_grid_argmax(self):
        rng = np.random.default_rng(64)
        checked = 0
        while checked < 20:
            config = random_config(rng)
            prefix = len(config.spikes)
            t_star, in_window = snn.local_max_moment(prefix, config, PARAMS, snn.exact_provider())
            if not in_window:
                continue
            oracle = grid_argmax(config, PARAMS, prefix)
            assert abs(t_star - oracle) <= PARAMS.T / 1e5 + 1e-9
            checked += 1

    def test_weight_scale_invariance(self):
        rng = np.random.default_rng(65)
        config = random_config(rng)
        prefix = len(config.spikes)
        base, _ = snn.local_max_moment(prefix, config, PARAMS, snn.exact_provider())
        for c in (0.01, 3.0, 250.0):
            scaled = snn.with_weights(config, config.weights * c)
            t_star, _ = snn.local_max_moment(prefix, scaled, PARAMS, snn.exact_provider())
            assert t_star == pytest.approx(base, abs=1e-10)

    def test_nonpositive_product_reports_prefix(self):
        config = snn.SpikeConfig(2, ((0, 5.0), (1, 6.0)), np.array([1.0, -5.0]))
        with pytest.raises(UnsignedProductError) as err:
            snn.local_max_moment(2, config, PARAMS, snn.exact_provider())
        assert err.value.prefix == 2

    def test_out_of_window_flagged(self):
        # a dominant early spike makes the late prefix stationary point sit
        # before the last spike moment
        config = snn.SpikeConfig(2, ((0, 5.0), (1, 60.0)), np.array([50.0, 0.001]))
        t_star, in_window = snn.local_max_moment(2, config, PARAMS, snn.exact_provider())
        assert t_star < 60.0
        assert not in_window


class TestDetectCrossings:
    def test_zero_weights_never_fire(self):
        config = snn.SpikeConfig(2, ((0, 5.0), (1, 7.0)), np.zeros(2))
        report = snn.detect_crossings(config, PARAMS, snn.exact_provider())
        assert not report.fired
        assert report.output_spikes == ()
        assert report.fallback_count == 2  # sign constraint failed per prefix

    def test_strong_single_spike_fires_at_peak(self):
        config = snn.SpikeConfig(1, ((0, 5.0),), np.array([2.0]))
        report = snn.detect_crossings(config, PARAMS, snn.exact_provider())
        assert report.fired
        assert report.output_spikes[0] == pytest.approx(
            5.0 + snn.kernel_peak_offset(PARAMS), abs=1e-10
        )

    def test_output_spikes_sorted_and_above_threshold(self):
        rng = np.random.default_rng(66)
        for _ in range(10):
            config = random_config(rng, max_spikes=8)
            report = snn.detect_crossings(config, PARAMS, snn.exact_provider())
            assert list(report.output_spikes) == sorted(report.output_spikes)
            for lm in report.local_maxima:
                if lm.in_window and lm.potential >= PARAMS.v_thr:
                    assert lm.t_star in report.output_spikes

    def test_exact_vs_quip_provider_agreement(self):
        rng = np.random.default_rng(67)
        agree = 0
        trials = 50
        quantum = snn.quip_provider(m=10, q=11, seed=5)
        for _ in range(trials):
            config = random_config(rng, max_spikes=6)
            exact_report = snn.detect_crossings(config, PARAMS, snn.exact_provider())
            quip_report = snn.detect_crossings(config, PARAMS, quantum)
            agree += exact_report.fired == quip_report.fired
        assert agree / trials >= 0.95


class TestTempotron:
    def test_correct_output_leaves_weights(self):
        config = snn.SpikeConfig(1, ((0, 5.0),), np.array([2.0]))
        report = snn.detect_crossings(config, PARAMS, snn.exact_provider())
        assert report.fired
        updated = snn.tempotron_update(config, PARAMS, True, report, lr=0.5)
        np.testing.assert_array_equal(updated, config.weights)

    def test_false_negative_grows_only_active_synapse(self):
        config = snn.SpikeConfig(3, ((1, 10.0),), np.array([0.05, 0.05, 0.05]))
        report = snn.detect_crossings(config, PARAMS, snn.exact_provider())
        assert not report.fired
        updated = snn.tempotron_update(config, PARAMS, True, report, lr=0.1)
        assert updated[1] > 0.05
        assert updated[0] == 0.05 and updated[2] == 0.05

    def test_false_positive_subtracts(self):
        config = snn.SpikeConfig(1, ((0, 5.0),), np.array([2.0]))
        report = snn.detect_crossings(config, PARAMS, snn.exact_provider())
        updated = snn.tempotron_update(config, PARAMS, False, report, lr=0.1)
        assert updated[0] < 2.0

    def test_toy_set_converges(self):
        params = snn.NeuronParams(tau=15.0, tau_s=3.75, v_thr=1.5, T=100.0)
        patterns = [
            ({0: 10.0, 1: 12.0}, True),
            ({2: 10.0, 3: 12.0}, False),
            ({0: 30.0, 1: 35.0}, True),
            ({2: 40.0, 3: 42.0}, False),
            ({0: 50.0, 1: 55.0}, True),
        ]
        weights = np.full(4, 0.3)
        provider = snn.exact_provider()
        for epoch in range(200):
            errors = 0
            for spikes, label in patterns:
                config = snn.SpikeConfig(4, tuple(spikes.items()), weights)
                report = snn.detect_crossings(config, params, provider)
                if report.fired != label:
                    errors += 1
                    weights = snn.tempotron_update(config, params, label, report, lr=0.1)
            if errors == 0:
                break
        assert errors == 0


class TestValidation:
    def test_neuron_params_ordering(self):
        with pytest.raises(ValueError):
            snn.NeuronParams(tau=3.0, tau_s=4.0, v_thr=1.0, T=10.0)

    def test_spike_config_shape(self):
        with pytest.raises(ValueError):
            snn.SpikeConfig(2, ((0, 1.0),), np.array([1.0]))

    def test_spike_index_range(self):
        with pytest.raises(ValueError):
            snn.SpikeConfig(2, ((5, 1.0),), np.array([1.0, 1.0]))
