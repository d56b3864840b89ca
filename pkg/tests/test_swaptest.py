"""Swap test: exact ancilla marginals, repetition estimates, interval math."""
import math

import numpy as np
import pytest
from scipy import stats

from qsnn import swaptest
from qsnn.encode import normalize
from qsnn.statevec import QubitSpan, StateVector, apply_controlled_swap, span_probabilities


def pair_with_product(ip, dim=2, rng=None):
    """Unit pair with exact product ip, optionally randomly rotated."""
    w = np.zeros(dim)
    w[0] = 1.0
    t = np.zeros(dim)
    t[0] = ip
    t[1] = math.sqrt(max(1.0 - ip * ip, 0.0))
    if rng is not None:
        q, _ = np.linalg.qr(rng.normal(size=(dim, dim)))
        w, t = q @ w, q @ t
    return normalize(w), normalize(t)


class TestBuildState:
    def test_identical_vectors(self):
        w, t = pair_with_product(1.0)
        state = swaptest.build_swap_test_state(w, w)
        np.testing.assert_allclose(
            span_probabilities(state, QubitSpan(0, 1)), [1.0, 0.0], atol=1e-12
        )

    def test_orthogonal_vectors(self):
        w, t = pair_with_product(0.0)
        state = swaptest.build_swap_test_state(w, t)
        np.testing.assert_allclose(
            span_probabilities(state, QubitSpan(0, 1)), [0.5, 0.5], atol=1e-12
        )

    def test_half_overlap(self):
        # |<w|t>|^2 = 0.5 puts the ancilla at [0.75, 0.25]
        w, t = pair_with_product(math.sqrt(0.5))
        state = swaptest.build_swap_test_state(w, t)
        np.testing.assert_allclose(
            span_probabilities(state, QubitSpan(0, 1)), [0.75, 0.25], atol=1e-12
        )

    def test_structure_matches_symmetrised_formula(self):
        rng = np.random.default_rng(5)
        w, t = pair_with_product(0.37, dim=4, rng=rng)
        state = swaptest.build_swap_test_state(w, t)
        wv, tv = w.real_amplitudes, t.real_amplitudes
        wt, tw = np.kron(wv, tv), np.kron(tv, wv)
        expected = np.concatenate([(wt + tw) / 2.0, (wt - tw) / 2.0])
        np.testing.assert_allclose(state.amplitudes, expected, atol=1e-10)

    def test_dimension_mismatch(self):
        w = normalize([1.0, 0.0])
        t = normalize([1.0, 0.0, 0.0, 0.0, 1.0])
        with pytest.raises(ValueError, match="mismatch"):
            swaptest.build_swap_test_state(w, t)

    def test_symmetric_in_arguments(self):
        rng = np.random.default_rng(6)
        w, t = pair_with_product(0.62, dim=4, rng=rng)
        a = swaptest.ancilla_probabilities(swaptest.build_swap_test_state(w, t))
        b = swaptest.ancilla_probabilities(swaptest.build_swap_test_state(t, w))
        assert a.p0 == pytest.approx(b.p0, abs=1e-12)

    def test_cswap_order_irrelevant(self):
        # the controlled swaps commute; any application order gives one state
        rng = np.random.default_rng(7)
        w, t = pair_with_product(0.3, dim=4, rng=rng)
        state = swaptest.build_swap_test_state(w, t)
        reordered = swaptest.build_swap_test_state(w, t)
        n = 2
        base = swaptest.build_swap_test_state(w, t)
        for order in ([0, 1], [1, 0]):
            probe = base
            for i in order:
                probe = apply_controlled_swap(probe, 0, 1 + i, 1 + n + i)
            for i in reversed(order):
                probe = apply_controlled_swap(probe, 0, 1 + i, 1 + n + i)
            np.testing.assert_allclose(probe.amplitudes, base.amplitudes, atol=1e-12)
        np.testing.assert_allclose(state.amplitudes, reordered.amplitudes)


class TestAncillaProbabilities:
    def test_identical(self):
        w, _ = pair_with_product(1.0)
        out = swaptest.ancilla_probabilities(swaptest.build_swap_test_state(w, w))
        assert (out.p0, out.p1, out.inner_product_sq) == pytest.approx((1.0, 0.0, 1.0))

    def test_orthogonal(self):
        w, t = pair_with_product(0.0)
        out = swaptest.ancilla_probabilities(swaptest.build_swap_test_state(w, t))
        assert (out.p0, out.p1, out.inner_product_sq) == pytest.approx((0.5, 0.5, 0.0))

    def test_product_0_6(self):
        # p0 = 1/2 + 1/2 * 0.36 = 0.68
        w, t = pair_with_product(0.6)
        out = swaptest.ancilla_probabilities(swaptest.build_swap_test_state(w, t))
        assert out.p0 == pytest.approx(0.68, abs=1e-12)
        assert out.p1 == pytest.approx(0.32, abs=1e-12)
        assert out.inner_product_sq == pytest.approx(0.36, abs=1e-12)

    def test_marginal_matches_analytic_on_random_pairs(self):
        rng = np.random.default_rng(8)
        for _ in range(25):
            ip = rng.uniform(0.0, 1.0)
            w, t = pair_with_product(ip, dim=4, rng=rng)
            exact = float(w.real_amplitudes @ t.real_amplitudes)
            out = swaptest.ancilla_probabilities(swaptest.build_swap_test_state(w, t))
            assert abs(2.0 * out.p0 - 1.0 - exact**2) <= 1e-10


class TestRepetitionEstimate:
    def test_identical_vectors_never_hit(self):
        rng = np.random.default_rng(9)
        w, _ = pair_with_product(1.0)
        est = swaptest.estimate_by_repetition(w, w, 500, rng)
        assert est.p1_hat == 0.0

    def test_orthogonal_within_binomial_band(self):
        rng = np.random.default_rng(10)
        w, t = pair_with_product(0.0)
        est = swaptest.estimate_by_repetition(w, t, 10_000, rng)
        assert 0.485 <= est.p1_hat <= 0.515

    def test_p1_quarter_band(self):
        # |<w|t>|^2 = 0.5 gives p1 = 0.25; 3 sigma over 10^4 shots is ~0.013
        rng = np.random.default_rng(11)
        w, t = pair_with_product(math.sqrt(0.5))
        est = swaptest.estimate_by_repetition(w, t, 10_000, rng)
        assert 0.237 <= est.p1_hat <= 0.263

    def test_unbiased_over_seeds(self):
        w, t = pair_with_product(0.6)
        p1 = 0.32
        n_a = 400
        means = [
            swaptest.estimate_by_repetition(w, t, n_a, np.random.default_rng(seed)).p1_hat
            for seed in range(200)
        ]
        sigma = math.sqrt(p1 * (1 - p1) / n_a) / math.sqrt(len(means))
        assert abs(np.mean(means) - p1) <= 3.0 * sigma


class TestRequiredRepetitions:
    @pytest.mark.parametrize("gamma,expected", [(1, 4), (2, 16), (3, 64)])
    def test_four_to_the_gamma(self, gamma, expected):
        assert swaptest.required_repetitions(gamma) == expected

    def test_constant_exposed(self):
        assert swaptest.required_repetitions(2, c=3) == 48

    def test_gamma_floor(self):
        with pytest.raises(ValueError):
            swaptest.required_repetitions(0)


class TestConfidenceInterval:
    def test_wide_window_limit(self):
        assert swaptest.confidence_interval(0.3, 100, 1e6) == pytest.approx(1.0)

    def test_empty_window(self):
        assert swaptest.confidence_interval(0.3, 100, 0.0) == 0.0

    def test_against_binomial_oracle(self):
        # exact binomial mass of ((1-d)*n*p1, (1+d)*n*p1]
        p1, n_a, delta = 0.5, 400, 0.1
        a, b = (1 - delta) * n_a * p1, (1 + delta) * n_a * p1
        exact = stats.binom.cdf(math.floor(b), n_a, p1) - stats.binom.cdf(
            math.floor(a), n_a, p1
        )
        approx = swaptest.confidence_interval(p1, n_a, delta)
        assert abs(approx - exact) <= 0.02

    @pytest.mark.parametrize("p1", [0.2, 0.4, 0.6])
    def test_oracle_other_operating_points(self, p1):
        n_a, delta = 900, 0.08
        a, b = (1 - delta) * n_a * p1, (1 + delta) * n_a * p1
        exact = stats.binom.cdf(math.floor(b), n_a, p1) - stats.binom.cdf(
            math.floor(a), n_a, p1
        )
        assert abs(swaptest.confidence_interval(p1, n_a, delta) - exact) <= 0.02

    def test_degenerate_p1_rejected(self):
        with pytest.raises(ValueError):
            swaptest.confidence_interval(0.0, 100, 0.1)
        with pytest.raises(ValueError):
            swaptest.confidence_interval(1.0, 100, 0.1)

    def test_phi_accuracy(self):
        assert swaptest.phi(0.0) == pytest.approx(0.5, abs=1e-15)
        assert swaptest.phi(1.0) == pytest.approx(0.8413447460685429, abs=1e-12)
