"""Dense state-vector simulator for small quantum registers.

Conventions, fixed once and used everywhere in this package:

* Qubit 0 is the MOST significant bit of a basis index.  A state reshaped
  to ``[2] * n_qubits`` therefore has qubit ``q`` on axis ``q``, and a
  contiguous run of qubits maps to a contiguous index field.
* Contiguous qubit ranges are addressed with :class:`QubitSpan`.  Spans
  passed to one operation must lie inside the register; spans used together
  must not overlap.
* All operations are pure: they return a fresh :class:`StateVector`.
  Unit norm is asserted on every construction; drift is a bug and is never
  silently renormalised away.

Dense simulation only.  Memory caps the register at roughly 22 qubits,
which covers everything this package needs (a 10-qubit readout register
plus an 11-qubit swap-test register).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

NORM_TOL = 1e-10
UNITARY_TOL = 1e-8
MAX_QUBITS = 22

# Span length above which the inverse-Fourier transform switches from the
# explicit matrix to the gate decomposition (phases + mixers + bit reversal).
IQFT_MATRIX_MAX = 6

_H = np.array([[1.0, 1.0], [1.0, -1.0]], dtype=complex) / np.sqrt(2.0)


@dataclass(frozen=True)
class QubitSpan:
    """Contiguous block of qubits: ``start``, ``start + 1``, ...

    With qubit 0 as the most significant bit, a span owns a contiguous
    bit field of every basis index.
    """

    start: int
    length: int

    def __post_init__(self):
        if self.start < 0 or self.length < 1:
            raise ValueError(f"invalid span ({self.start}, {self.length})")

    @property
    def dim(self) -> int:
        return 1 << self.length

    def check_within(self, n_qubits: int) -> None:
        if self.start + self.length > n_qubits:
            raise ValueError(
                f"span ({self.start}, {self.length}) exceeds register of {n_qubits} qubits"
            )


@dataclass(frozen=True)
class StateVector:
    """Normalised complex amplitudes over ``2**n_qubits`` basis states."""

    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        if not 0 <= self.n_qubits <= MAX_QUBITS:
            raise ValueError(f"n_qubits must be in [0, {MAX_QUBITS}], got {self.n_qubits}")
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (1 << self.n_qubits,):
            raise ValueError(
                f"expected {1 << self.n_qubits} amplitudes, got shape {amps.shape}"
            )
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state norm drifted to {norm!r}")
        object.__setattr__(self, "amplitudes", amps)

    @property
    def dim(self) -> int:
        return self.amplitudes.size


@dataclass(frozen=True)
class MeasurementSample:
    """One projective measurement of a span: basis index plus collapsed state."""

    outcome: int
    post_state: StateVector


def init_basis(n_qubits: int, basis_index: int) -> StateVector:
    """Computational basis state |basis_index> on an n-qubit register."""
    dim = 1 << n_qubits
    if not 0 <= basis_index < dim:
        raise ValueError(f"basis index {basis_index} out of range for {n_qubits} qubits")
    amps = np.zeros(dim, dtype=complex)
    amps[basis_index] = 1.0
    return StateVector(n_qubits, amps)


def _blocks(state: StateVector, span: QubitSpan) -> np.ndarray:
    """Copy of the amplitudes shaped (left, span, right)."""
    span.check_within(state.n_qubits)
    left = 1 << span.start
    right = 1 << (state.n_qubits - span.start - span.length)
    return state.amplitudes.reshape(left, span.dim, right).copy()


def _bit_position(state: StateVector, qubit: int) -> int:
    if not 0 <= qubit < state.n_qubits:
        raise ValueError(f"qubit {qubit} out of range for {state.n_qubits}-qubit register")
    return state.n_qubits - 1 - qubit


def check_unitary(matrix: np.ndarray, tol: float = UNITARY_TOL) -> np.ndarray:
    """Validate and return the matrix as complex; raises if not unitary."""
    mat = np.asarray(matrix, dtype=complex)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError(f"matrix must be square, got shape {mat.shape}")
    defect = np.max(np.abs(mat @ mat.conj().T - np.eye(mat.shape[0])))
    if defect > tol:
        raise ValueError(f"matrix is not unitary (defect {defect:.3e})")
    return mat


def apply_unitary_on_span(state: StateVector, span: QubitSpan, matrix: np.ndarray) -> StateVector:
    """Apply I (x) matrix (x) I with the matrix acting on the span's bit field."""
    mat = check_unitary(matrix)
    if mat.shape[0] != span.dim:
        raise ValueError(f"matrix dim {mat.shape[0]} does not match span dim {span.dim}")
    blk = _blocks(state, span)
    blk = np.einsum("ij,ajb->aib", mat, blk)
    return StateVector(state.n_qubits, blk.reshape(-1))


def _apply_1q(state: StateVector, qubit: int, mat: np.ndarray) -> StateVector:
    blk = _blocks(state, QubitSpan(qubit, 1))
    blk = np.einsum("ij,ajb->aib", mat, blk)
    return StateVector(state.n_qubits, blk.reshape(-1))


def apply_hadamard_all(state: StateVector, span: QubitSpan) -> StateVector:
    """Hadamard on every qubit of the span (uniform mixer on |0...0>)."""
    span.check_within(state.n_qubits)
    out = state
    for q in range(span.start, span.start + span.length):
        out = _apply_1q(out, q, _H)
    return out


def apply_controlled_swap(state: StateVector, control: int, a: int, b: int) -> StateVector:
    """Exchange bits a and b on basis states whose control bit is 1."""
    if len({control, a, b}) != 3:
        raise ValueError(f"control/a/b must be distinct, got {(control, a, b)}")
    pc = _bit_position(state, control)
    pa = _bit_position(state, a)
    pb = _bit_position(state, b)
    idx = np.arange(state.dim)
    differ = (((idx >> pc) & 1) == 1) & (((idx >> pa) & 1) != ((idx >> pb) & 1))
    src = np.where(differ, idx ^ ((1 << pa) | (1 << pb)), idx)
    return StateVector(state.n_qubits, state.amplitudes[src])


def _apply_swap(state: StateVector, a: int, b: int) -> StateVector:
    pa = _bit_position(state, a)
    pb = _bit_position(state, b)
    idx = np.arange(state.dim)
    differ = ((idx >> pa) & 1) != ((idx >> pb) & 1)
    src = np.where(differ, idx ^ ((1 << pa) | (1 << pb)), idx)
    return StateVector(state.n_qubits, state.amplitudes[src])


def _apply_cphase(state: StateVector, a: int, b: int, angle: float) -> StateVector:
    """Diagonal phase e^{i angle} on basis states with both bits set."""
    pa = _bit_position(state, a)
    pb = _bit_position(state, b)
    idx = np.arange(state.dim)
    both = (((idx >> pa) & 1) == 1) & (((idx >> pb) & 1) == 1)
    amps = state.amplitudes.copy()
    amps[both] *= np.exp(1j * angle)
    return StateVector(state.n_qubits, amps)


def iqft_matrix(m: int) -> np.ndarray:
    """Inverse Fourier matrix, entry (h, k) = 2^(-m/2) e^(-i 2 pi h k / 2^m)."""
    dim = 1 << m
    hk = np.outer(np.arange(dim), np.arange(dim))
    return np.exp(-2j * np.pi * hk / dim) / np.sqrt(dim)


def _apply_iqft_gates(state: StateVector, span: QubitSpan) -> StateVector:
    """Gate decomposition: bit reversal, then conjugated phases and mixers."""
    m = span.length
    qs = [span.start + j for j in range(m)]
    out = state
    for j in range(m // 2):
        out = _apply_swap(out, qs[j], qs[m - 1 - j])
    for j in reversed(range(m)):
        for k in range(m - 1, j, -1):
            out = _apply_cphase(out, qs[j], qs[k], -2.0 * np.pi / (1 << (k - j + 1)))
        out = _apply_1q(out, qs[j], _H)
    return out


def apply_iqft(state: StateVector, span: QubitSpan) -> StateVector:
    """Inverse Fourier transform of the span's bit field.

    Explicit matrix for spans up to IQFT_MATRIX_MAX qubits, gate
    decomposition beyond; both routes agree within 1e-8 (tested).
    """
    span.check_within(state.n_qubits)
    if span.length <= IQFT_MATRIX_MAX:
        return apply_unitary_on_span(state, span, iqft_matrix(span.length))
    return _apply_iqft_gates(state, span)


def apply_controlled_unitary(
    state: StateVector, control: int, span: QubitSpan, matrix: np.ndarray
) -> StateVector:
    """Apply the span unitary only on basis states whose control bit is 1."""
    span.check_within(state.n_qubits)
    if span.start <= control < span.start + span.length:
        raise ValueError(f"control qubit {control} lies inside the target span")
    mat = check_unitary(matrix)
    if mat.shape[0] != span.dim:
        raise ValueError(f"matrix dim {mat.shape[0]} does not match span dim {span.dim}")
    tensor = state.amplitudes.reshape([2] * state.n_qubits).copy()
    sel = [slice(None)] * state.n_qubits
    sel[control] = 1
    sub = tensor[tuple(sel)]
    start = span.start - 1 if control < span.start else span.start
    left = 1 << start
    right = sub.size // (left * span.dim)
    blk = sub.reshape(left, span.dim, right)
    tensor[tuple(sel)] = np.einsum("ij,ajb->aib", mat, blk).reshape(sub.shape)
    return StateVector(state.n_qubits, tensor.reshape(-1))


def span_probabilities(state: StateVector, span: QubitSpan) -> np.ndarray:
    """Marginal outcome probabilities of the span's basis states."""
    blk = _blocks(state, span)
    probs = np.abs(blk) ** 2
    out = probs.sum(axis=(0, 2))
    total = out.sum()
    if abs(total - 1.0) > NORM_TOL:
        raise ValueError(f"marginal probabilities sum to {total!r}")
    return out


def sample_span(
    state: StateVector, span: QubitSpan, shots: int, rng: np.random.Generator
) -> np.ndarray:
    """Draw measurement outcomes of the span without collapsing the state."""
    probs = span_probabilities(state, span)
    return rng.choice(probs.size, size=shots, p=probs / probs.sum())


def measure_span(
    state: StateVector, span: QubitSpan, rng: np.random.Generator
) -> MeasurementSample:
    """Projective measurement of the span; deterministic for a seeded rng."""
    probs = span_probabilities(state, span)
    outcome = int(rng.choice(probs.size, p=probs / probs.sum()))
    blk = _blocks(state, span)
    kept = blk[:, outcome, :] / np.sqrt(probs[outcome])
    blk[:] = 0.0
    blk[:, outcome, :] = kept
    return MeasurementSample(outcome, StateVector(state.n_qubits, blk.reshape(-1)))
