"""Amplitude-estimation readout of unsigned vector inner products (QUIP).

Instead of repeating the swap test and counting ancilla hits, the swap-test
state is fed to phase estimation: an m-qubit control register accumulates
controlled powers of a Grover-type rotation whose angle 2*theta encodes the
overlap through <w|t> = sqrt(cos 2*theta), theta in [0, pi/4].  After an
inverse Fourier transform the control register collapses onto (roughly)
r = 2^m * theta / pi or its mirror 2^m - r, and one readout r decodes to the
product:

    low band   0 <= r <= 2^(m-2):          <w|t> = sqrt(cos(pi r / 2^(m-1)))
    high band  3*2^(m-2) <= r <= 2^m - 1:  mirrored
    middle band: unreachable except through estimation tails; tagged invalid.

When 2^m * theta / pi is not an integer the readout rounds, with offset
``delta_r`` in [-2^-(m+1), 2^-(m+1)).  Closed forms implemented here:
the probability of the rounded outcome (worst case 4/pi^2), the slack
variant accepting r~+-1 (worst case 76/(9 pi^2)), the majority-vote boost
over q repetitions, and the worst-case decode error.

Two execution modes, equal in distribution (tested):

* ``"circuit"``   - full gate-level simulation; ground truth for small m, J.
* ``"analytic"``  - sample the closed-form outcome distribution; fast path
  for experiment-scale m.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .encode import EncodedState, as_real_vector, build_preparation_unitary, normalize
from .statevec import (
    MAX_QUBITS,
    QubitSpan,
    apply_controlled_unitary,
    apply_controlled_swap,
    apply_hadamard_all,
    apply_iqft,
    apply_unitary_on_span,
    init_basis,
    span_probabilities,
)

BAND_LOW = "low"
BAND_HIGH = "high"
BAND_MIDDLE = "invalid-middle"

MIN_SUCCESS = 4.0 / math.pi**2           # worst-case single-outcome probability
MIN_SLACK_SUCCESS = 76.0 / (9.0 * math.pi**2)  # worst case accepting r~ +- 1

# Worst-case |r - readout| in register units: 1/2 from rounding alone,
# 3/2 when the slack window r~ +- 1 is accepted as correct.
ROUND_EDGE = 0.5
SLACK_EDGE = 1.5

_DEGENERATE_TOL = 1e-9


class UnsignedProductError(ValueError):
    """Exact inner product violates the unsigned (> 0) constraint."""

    def __init__(self, message: str, prefix: int | None = None):
        super().__init__(message)
        self.prefix = prefix


@dataclass(frozen=True)
class QuipConfig:
    """Run parameters: control width m, odd vote count q, slack flag, mode, seed."""

    m: int
    q: int = 1
    slack: bool = True
    mode: str = "analytic"
    seed: int = 0

    def __post_init__(self):
        if self.m < 2:
            raise ValueError(f"control register needs m >= 2 qubits, got {self.m}")
        if self.q < 1 or self.q % 2 == 0:
            raise ValueError(f"repetition count q must be odd and >= 1, got {self.q}")
        if self.mode not in ("analytic", "circuit"):
            raise ValueError(f"mode must be 'analytic' or 'circuit', got {self.mode!r}")


@dataclass(frozen=True)
class GroverOperator:
    """Rotation by 2*theta: as a 2x2 matrix and as the full register circuit."""

    theta: float
    as_rotation: np.ndarray
    as_circuit: np.ndarray


@dataclass(frozen=True)
class QuipResult:
    """Decoded readout: winning register value, phase, product and band."""

    r_measured: int
    theta_hat: float
    inner_product: float
    band: str
    votes: dict[int, int] = field(default_factory=dict)


@dataclass(frozen=True)
class ErrorModel:
    """Per-readout rounding offset and its success/error figures."""

    delta_r: float
    p_success: float
    p_slack: float
    max_epsilon: float

    def __post_init__(self):
        if self.p_slack < self.p_success - 1e-12:
            raise ValueError("slack probability cannot undercut the single-outcome one")
        if self.p_success < MIN_SUCCESS - 1e-9:
            raise ValueError(f"success probability {self.p_success} below the 4/pi^2 floor")


def theta_from_inner_product(ip: float) -> float:
    """Phase encoding theta = arccos(ip^2) / 2 in [0, pi/4]."""
    if not 0.0 <= ip <= 1.0:
        raise ValueError(f"inner product must lie in [0, 1], got {ip}")
    return 0.5 * math.acos(min(ip * ip, 1.0))


def inner_product_from_theta(theta: float) -> float:
    """Inverse encoding sqrt(cos 2*theta) on [0, pi/4]."""
    return math.sqrt(max(math.cos(2.0 * theta), 0.0))


def exact_normalized_product(w: EncodedState, t: EncodedState) -> float:
    """Classical <w|t> of two encoded states (real amplitudes)."""
    if w.state.n_qubits != t.state.n_qubits:
        raise ValueError("encoded states live on different register sizes")
    return float(w.real_amplitudes @ t.real_amplitudes)


def swap_test_unitary(w: EncodedState, t: EncodedState) -> np.ndarray:
    """Explicit matrix of the swap-test circuit on the (1+2n)-qubit register.

    Ancilla is the register's most significant qubit; the two n-qubit data
    fields follow.
    """
    n = w.state.n_qubits
    if t.state.n_qubits != n:
        raise ValueError("register size mismatch between the two encodings")
    dim = 1 << (1 + 2 * n)
    half = dim // 2
    prep = np.kron(
        np.eye(2), np.kron(build_preparation_unitary(w), build_preparation_unitary(t))
    ).astype(complex)
    h_anc = np.kron(np.array([[1, 1], [1, -1]]) / np.sqrt(2.0), np.eye(half)).astype(complex)
    # All n controlled swaps compose to one permutation: swap the two n-bit
    # data fields wherever the ancilla bit is set.
    idx = np.arange(dim)
    anc = idx >> (2 * n)
    f1 = (idx >> n) & ((1 << n) - 1)
    f2 = idx & ((1 << n) - 1)
    swapped = (anc << (2 * n)) | (f2 << n) | f1
    dest = np.where(anc == 1, swapped, idx)
    cswap = np.zeros((dim, dim), dtype=complex)
    cswap[dest, idx] = 1.0
    return h_anc @ cswap @ h_anc @ prep


def build_grover_operator(w: EncodedState, t: EncodedState) -> GroverOperator:
    """Rotation -Us I0 Us^-1 O with O flipping the ancilla-|1> component and
    I0 flipping the all-zeros register state.

    Restricted to the plane spanned by the symmetric and antisymmetric
    swap-test components, the circuit acts as
    [[cos 2t, sin 2t], [-sin 2t, cos 2t]] (verified by test).
    """
    ip = exact_normalized_product(w, t)
    theta = 0.5 * math.acos(min(max(ip * ip, 0.0), 1.0))
    us = swap_test_unitary(w, t)
    dim = us.shape[0]
    anc_sign = np.where(np.arange(dim) >> (int(math.log2(dim)) - 1) == 1, -1.0, 1.0)
    oracle = np.diag(anc_sign).astype(complex)
    i0 = np.eye(dim, dtype=complex)
    i0[0, 0] = -1.0
    circuit = -(us @ i0 @ us.conj().T @ oracle)
    c2, s2 = math.cos(2.0 * theta), math.sin(2.0 * theta)
    rotation = np.array([[c2, s2], [-s2, c2]])
    return GroverOperator(theta, rotation, circuit)


def rotation_subspace_basis(w: EncodedState, t: EncodedState) -> np.ndarray:
    """Orthonormal (dim x 2) basis of the plane the Grover circuit rotates in.

    Column 0: ancilla |0> with the symmetric component (|w>|t> + |t>|w>)/2;
    column 1: ancilla |1> with the antisymmetric component (|t>|w> - |w>|t>)/2,
    oriented so the restricted circuit matches the rotation convention above.
    Undefined for identical vectors (theta = 0).
    """
    ip = exact_normalized_product(w, t)
    theta = 0.5 * math.acos(min(max(ip * ip, 0.0), 1.0))
    if math.sin(theta) < _DEGENERATE_TOL:
        raise ValueError("rotation plane degenerates at theta = 0 (identical vectors)")
    wv, tv = w.real_amplitudes, t.real_amplitudes
    wt, tw = np.kron(wv, tv), np.kron(tv, wv)
    anc0 = np.concatenate([wt + tw, np.zeros_like(wt)]) / (2.0 * math.cos(theta))
    anc1 = np.concatenate([np.zeros_like(wt), tw - wt]) / (2.0 * math.sin(theta))
    return np.stack([anc0, anc1], axis=1).astype(complex)


def rotation_subspace_restriction(
    matrix: np.ndarray, w: EncodedState, t: EncodedState
) -> np.ndarray:
    """2x2 action of a target-register matrix on the rotation plane."""
    basis = rotation_subspace_basis(w, t)
    return basis.conj().T @ matrix @ basis


def _dirichlet_prob(offset, m: int):
    """Squared projection of a phase ramp onto one Fourier basis vector.

    ``offset`` is (actual r) - (readout h) in register units; the value is
    sin^2(pi*offset) / (2^m sin(pi*offset/2^m))^2 with the removable
    singularity at offset = 0 (mod 2^m) filled with its limit 1.
    Argument reduction keeps large offsets exact: only offset mod 1 enters
    the numerator and offset mod 2^m the denominator.
    """
    dim = float(1 << m)
    x = np.asarray(offset, dtype=float)
    xm = np.mod(x, dim)
    frac = np.mod(x, 1.0)
    num = np.sin(np.pi * frac) ** 2
    den = (dim * np.sin(np.pi * xm / dim)) ** 2
    exact = xm == 0.0
    out = np.where(exact, 1.0, num / np.where(exact, 1.0, den))
    return out if out.ndim else float(out)


def success_probability(delta_r, m: int):
    """Probability that the readout equals the rounded register value.

    ``delta_r`` is the fractional rounding offset (r - r~)/2^m; the worst
    case |delta_r| = 2^-(m+1) approaches 4/pi^2 from above.  Accepts scalars
    or arrays.
    """
    return _dirichlet_prob(np.asarray(delta_r, dtype=float) * (1 << m), m)


def slack_probability(delta_r, m: int):
    """Probability of landing on the rounded value or either neighbour.

    Sum of ``success_probability`` at delta_r and delta_r +- 2^-m; the worst
    case approaches 76/(9 pi^2) for large m.
    """
    x = np.asarray(delta_r, dtype=float) * (1 << m)
    return _dirichlet_prob(x, m) + _dirichlet_prob(x + 1.0, m) + _dirichlet_prob(x - 1.0, m)


def majority_vote_probability(p: float, q: int) -> float:
    """Probability that at least floor(q/2) + 1 of q independent trials succeed."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    if q < 1 or q % 2 == 0:
        raise ValueError(f"q must be odd and >= 1, got {q}")
    return float(
        sum(math.comb(q, k) * p**k * (1.0 - p) ** (q - k) for k in range(q // 2 + 1, q + 1))
    )


def round_half_up(r: float, m: int) -> int:
    """Register readout r~ = floor(r + 1/2) mod 2^m, so (r - r~) in [-1/2, 1/2)."""
    return int(math.floor(r + 0.5)) % (1 << m)


def band_of(r: int, m: int) -> str:
    dim = 1 << m
    if not 0 <= r < dim:
        raise ValueError(f"readout {r} out of range for m={m}")
    quarter = dim // 4
    if r <= quarter:
        return BAND_LOW
    if r >= 3 * quarter:
        return BAND_HIGH
    return BAND_MIDDLE


def _clamp_to_band_edge(r: int, m: int) -> int:
    """Nearest valid band edge for a middle-band readout (ties go low)."""
    quarter = (1 << m) // 4
    low_edge, high_edge = quarter, 3 * quarter
    return low_edge if (r - low_edge) <= (high_edge - r) else high_edge


def theta_of_outcome(r: int, m: int) -> float:
    """Phase the readout encodes: pi*r/2^m in the low band, mirrored above."""
    dim = 1 << m
    band = band_of(r, m)
    if band == BAND_MIDDLE:
        raise ValueError(f"readout {r} sits in the invalid middle band for m={m}")
    eff = r if band == BAND_LOW else dim - r
    return math.pi * eff / dim


def decode_measurement(r: int, m: int) -> tuple[float, str]:
    """Map a register readout to (inner product, band).

    Middle-band readouts decode as the nearest band edge (product 0) and keep
    the invalid-middle tag; they arise only from estimation tails.
    """
    band = band_of(r, m)
    r_eff = _clamp_to_band_edge(r, m) if band == BAND_MIDDLE else r
    dim = 1 << m
    low_r = r_eff if r_eff <= dim // 4 else dim - r_eff
    angle = math.pi * low_r / (1 << (m - 1))
    return math.sqrt(max(math.cos(angle), 0.0)), band


def max_error(r_tilde: int, m: int, edge: float = ROUND_EDGE) -> float:
    """Worst-case decode error for a readout r~, given |r - r~| <= edge.

    ``edge`` is in register units: 0.5 covers rounding alone, 1.5 covers the
    slack window.  The actual phase index stays inside [0, 2^(m-2)] (low
    band; mirrored above), so the shifted angle is clipped to [0, pi/2].
    Rejects middle-band readouts.
    """
    band = band_of(r_tilde, m)
    if band == BAND_MIDDLE:
        raise ValueError(f"readout {r_tilde} has no error bound (middle band)")
    dim = 1 << m
    low_r = r_tilde if band == BAND_LOW else dim - r_tilde
    angle = math.pi * low_r / (1 << (m - 1))
    shift = math.pi * edge / (1 << (m - 1))
    base = math.sqrt(max(math.cos(angle), 0.0))
    lo = math.sqrt(max(math.cos(max(angle - shift, 0.0)), 0.0))
    hi = math.sqrt(max(math.cos(min(angle + shift, 0.5 * math.pi)), 0.0))
    return max(abs(lo - base), abs(base - hi))


def error_model(ip_exact: float, m: int) -> ErrorModel:
    """Rounding offset and success/error figures for an exact product."""
    theta = theta_from_inner_product(ip_exact)
    r = (1 << m) * theta / math.pi
    r_tilde = round_half_up(r, m)
    delta_r = (r - math.floor(r + 0.5)) / (1 << m)
    return ErrorModel(
        delta_r=delta_r,
        p_success=float(success_probability(delta_r, m)),
        p_slack=float(slack_probability(delta_r, m)),
        max_epsilon=max_error(r_tilde, m),
    )


def outcome_distribution(theta: float, m: int) -> np.ndarray:
    """Exact control-register distribution over the 2^m readouts.

    Both phase branches (+theta and -theta ride orthogonal rotation
    eigenvectors) contribute weight 1/2; the result sums to 1 exactly.
    """
    if not 0.0 <= theta <= 0.25 * math.pi + 1e-12:
        raise ValueError(f"theta must lie in [0, pi/4], got {theta}")
    dim = 1 << m
    r = dim * theta / math.pi
    h = np.arange(dim, dtype=float)
    return 0.5 * _dirichlet_prob(r - h, m) + 0.5 * _dirichlet_prob((dim - r) - h, m)


def control_distribution_circuit(w: EncodedState, t: EncodedState, m: int) -> np.ndarray:
    """Control-register distribution from the full gate-level circuit.

    Register layout: m control qubits (most significant), then the ancilla,
    then the two data fields.  Ground truth for ``outcome_distribution``;
    cost grows as 2^(m + 1 + 2n), so keep m and J small.
    """
    n = w.state.n_qubits
    if t.state.n_qubits != n:
        raise ValueError("register size mismatch between the two encodings")
    total = m + 1 + 2 * n
    if total > MAX_QUBITS:
        raise ValueError(f"register of {total} qubits exceeds the dense-simulation cap")
    target = QubitSpan(m, 1 + 2 * n)
    state = init_basis(total, 0)
    # Swap-test preparation, gate by gate.
    state = apply_unitary_on_span(state, QubitSpan(m + 1, n), build_preparation_unitary(w))
    state = apply_unitary_on_span(state, QubitSpan(m + 1 + n, n), build_preparation_unitary(t))
    state = apply_hadamard_all(state, QubitSpan(m, 1))
    for i in range(n):
        state = apply_controlled_swap(state, m, m + 1 + i, m + 1 + n + i)
    state = apply_hadamard_all(state, QubitSpan(m, 1))
    # Phase estimation: superpose the control register, kick back controlled
    # powers of the rotation, transform back, read out.
    state = apply_hadamard_all(state, QubitSpan(0, m))
    grover = build_grover_operator(w, t).as_circuit
    for j in range(m):
        power = np.linalg.matrix_power(grover, 1 << (m - 1 - j))
        state = apply_controlled_unitary(state, j, target, power)
    state = apply_iqft(state, QubitSpan(0, m))
    return span_probabilities(state, QubitSpan(0, m))


def aggregate_votes(outcomes: dict[int, int] | Counter, m: int, slack: bool) -> QuipResult:
    """Pick the winning readout from a vote histogram and decode it.

    With slack on, votes within +-1 (mod 2^m) of a candidate count toward
    it.  Ties break to the smallest register value.  A middle-band winner is
    decoded by clamping to the nearest band edge and keeps its tag.
    """
    votes = dict(outcomes)
    if not votes:
        raise ValueError("empty vote histogram")
    dim = 1 << m
    for r in votes:
        if not 0 <= r < dim:
            raise ValueError(f"vote value {r} out of range for m={m}")

    def cluster_weight(r: int) -> int:
        if not slack:
            return votes.get(r, 0)
        return sum(votes.get((r + d) % dim, 0) for d in (-1, 0, 1))

    winner = min(votes, key=lambda r: (-cluster_weight(r), r))
    inner, band = decode_measurement(winner, m)
    r_eff = _clamp_to_band_edge(winner, m) if band == BAND_MIDDLE else winner
    theta_hat = theta_of_outcome(r_eff, m)
    return QuipResult(winner, theta_hat, inner, band, votes)


def run_quip(w, t, cfg: QuipConfig, rng: np.random.Generator | None = None) -> QuipResult:
    """Estimate the unsigned inner product of two real vectors.

    Normalises both vectors, checks the unsigned constraint on the exact
    product of the normalised pair (simulation-side check; a hardware run
    could not see the sign), samples cfg.q readouts in the configured mode
    and aggregates them.  The decoded value estimates <w|t> of the
    normalised vectors; multiply by both stored norms to recover the raw
    product.
    """
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    ew, et = normalize(as_real_vector(w)), normalize(as_real_vector(t))
    exact = exact_normalized_product(ew, et)
    if exact < -1e-12:
        raise UnsignedProductError(
            f"exact normalised product {exact:.6g} violates the unsigned constraint"
        )
    exact = max(exact, 0.0)
    if cfg.mode == "analytic":
        theta = theta_from_inner_product(min(exact, 1.0))
        probs = outcome_distribution(theta, cfg.m)
    else:
        probs = control_distribution_circuit(ew, et, cfg.m)
    draws = rng.choice(probs.size, size=cfg.q, p=probs / probs.sum())
    return aggregate_votes(Counter(int(d) for d in draws), cfg.m, cfg.slack)


@dataclass(frozen=True)
class GateCountReport:
    """Raw elementary-operation counts for one estimation run (no asymptotics)."""

    j_dim: int
    m: int
    data_qubits: int
    cswaps_per_swap_op: int
    gates_per_swap_op: int
    grover_applications: int
    gates_per_grover: int
    control_hadamards: int
    iqft_hadamards: int
    iqft_phase_gates: int
    iqft_swaps: int
    total: int


def gate_count(j_dim: int, m: int) -> GateCountReport:
    """Operation counts: swap-op internals, 2^m - 1 rotation applications, IQFT."""
    if j_dim < 1:
        raise ValueError("vector dimension must be at least 1")
    if m < 1:
        raise ValueError("control register needs at least 1 qubit")
    cswaps = (j_dim - 1).bit_length()  # ceil(log2 J)
    n = cswaps
    gates_per_swap_op = 2 + 2 + cswaps  # two preparations, two Hadamards, swaps
    grover_applications = (1 << m) - 1  # sum of controlled powers 2^0..2^(m-1)
    gates_per_grover = 2 * gates_per_swap_op + 2  # Us, Us^-1, oracle, zero flip
    iqft_h = m
    iqft_phases = m * (m - 1) // 2
    iqft_swaps = m // 2
    total = (
        gates_per_swap_op  # initial preparation of the swap-test state
        + m  # control-register mixers
        + grover_applications * gates_per_grover
        + iqft_h
        + iqft_phases
        + iqft_swaps
    )
    return GateCountReport(
        j_dim=j_dim,
        m=m,
        data_qubits=n,
        cswaps_per_swap_op=cswaps,
        gates_per_swap_op=gates_per_swap_op,
        grover_applications=grover_applications,
        gates_per_grover=gates_per_grover,
        control_hadamards=m,
        iqft_hadamards=iqft_h,
        iqft_phase_gates=iqft_phases,
        iqft_swaps=iqft_swaps,
        total=total,
    )
