"""Swap-test circuit and the statistics of estimating its ancilla probability.

The circuit: Hadamard on one ancilla, a controlled swap of the two data
registers qubit-by-qubit, Hadamard again.  The ancilla marginal then carries
the squared overlap of the two encoded vectors:

    P(0) = 1/2 + 1/2 <w|t>^2,      P(1) = 1/2 - 1/2 <w|t>^2.

Reading the overlap off P(1) by repetition is expensive: a target of gamma
binary digits needs about 4^gamma shots.  ``confidence_interval`` gives the
normal-approximation probability that a shot count lands inside a relative
window, and ``required_repetitions`` exposes the 4^gamma budget.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .encode import EncodedState, build_preparation_unitary
from .statevec import (
    QubitSpan,
    StateVector,
    apply_controlled_swap,
    apply_hadamard_all,
    apply_unitary_on_span,
    init_basis,
    span_probabilities,
)

PROB_TOL = 1e-12


@dataclass(frozen=True)
class SwapTestOutcome:
    """Exact ancilla marginals and the squared overlap they encode."""

    p0: float
    p1: float
    inner_product_sq: float

    def __post_init__(self):
        if abs(self.p0 + self.p1 - 1.0) > PROB_TOL:
            raise ValueError("ancilla probabilities must sum to 1")
        if abs(self.p0 - 0.5 - 0.5 * self.inner_product_sq) > PROB_TOL:
            raise ValueError("p0 must equal 1/2 + 1/2 * inner_product_sq")


@dataclass(frozen=True)
class RepetitionEstimate:
    """Sampled estimate of P(1) from n_a independent circuit executions."""

    n_a: int
    p1_hat: float
    gamma: int | None = None

    def __post_init__(self):
        if self.n_a < 1:
            raise ValueError("n_a must be at least 1")
        if not 0.0 <= self.p1_hat <= 1.0:
            raise ValueError("p1_hat must lie in [0, 1]")


def build_swap_test_state(w: EncodedState, t: EncodedState) -> StateVector:
    """Run the swap-test circuit on |0>|w>|t>; returns the (1+2n)-qubit state."""
    n = w.state.n_qubits
    if t.state.n_qubits != n:
        raise ValueError(
            f"register size mismatch: {n} vs {t.state.n_qubits} qubits"
        )
    state = init_basis(1 + 2 * n, 0)
    state = apply_unitary_on_span(state, QubitSpan(1, n), build_preparation_unitary(w))
    state = apply_unitary_on_span(state, QubitSpan(1 + n, n), build_preparation_unitary(t))
    state = apply_hadamard_all(state, QubitSpan(0, 1))
    for i in range(n):
        state = apply_controlled_swap(state, 0, 1 + i, 1 + n + i)
    state = apply_hadamard_all(state, QubitSpan(0, 1))
    return state


def ancilla_probabilities(state: StateVector) -> SwapTestOutcome:
    """Exact ancilla marginals of a swap-test output state."""
    p0, p1 = span_probabilities(state, QubitSpan(0, 1))
    ip_sq = min(max(2.0 * p0 - 1.0, 0.0), 1.0)
    return SwapTestOutcome(float(p0), float(p1), ip_sq)


def estimate_by_repetition(
    w: EncodedState, t: EncodedState, n_a: int, rng: np.random.Generator, gamma: int | None = None
) -> RepetitionEstimate:
    """Estimate P(1) as the hit fraction of n_a independent ancilla measurements."""
    if n_a < 1:
        raise ValueError("n_a must be at least 1")
    outcome = ancilla_probabilities(build_swap_test_state(w, t))
    hits = int(rng.binomial(n_a, outcome.p1))
    return RepetitionEstimate(n_a, hits / n_a, gamma)


def required_repetitions(gamma: int, c: int = 1) -> int:
    """Shot budget c * 4^gamma for gamma binary digits of probability accuracy.

    The leading-order constant is c = 1; it is a parameter so scaling-law
    fits can measure it instead of assuming it.
    """
    if gamma < 1:
        raise ValueError("gamma must be at least 1")
    return c * 4**gamma


def phi(x: float) -> float:
    """Standard normal CDF, evaluated via erfc (good to ~1e-15)."""
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def confidence_interval(p1: float, n_a: int, delta: float) -> float:
    """Normal-approximation mass of the relative window ((1-delta)*n_a*p1, (1+delta)*n_a*p1].

    Returns 2*Phi(delta * sqrt(n_a) * sqrt(p1/p0)) - 1, the symmetric-interval
    probability.  (The unsubtracted 2*Phi(x) exceeds 1 for large x and is not
    a probability; compose it from :func:`phi` if you want the raw value.)
    Meaningful in the normal regime, n_a >= 30 or so.
    """
    if not 0.0 < p1 < 1.0:
        raise ValueError(f"p1 must be strictly inside (0, 1), got {p1}")
    if n_a < 1:
        raise ValueError("n_a must be at least 1")
    if delta < 0.0:
        raise ValueError("delta must be non-negative")
    x = delta * math.sqrt(n_a) * math.sqrt(p1 / (1.0 - p1))
    return 2.0 * phi(x) - 1.0
