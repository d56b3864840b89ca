"""Amplitude encoding of real vectors into small quantum registers.

A real vector of logical dimension J is zero-padded to the next power of
two (at least 2) and divided by its Euclidean norm; the divided-out norm is
kept alongside the state so callers can undo the normalisation.  The
preparation unitary is an exact orthonormal completion of the target
amplitudes (Householder reflection), so preparing from |0...0> is exact up
to float round-off.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .statevec import StateVector

REAL_TOL = 1e-12
# Largest exponent e^x representable as a double.
_EXP_MAX = math.log(np.finfo(float).max)


@dataclass(frozen=True)
class RealVector:
    """Real coefficient vector of logical dimension >= 1, not identically zero."""

    values: np.ndarray

    def __post_init__(self):
        vals = np.atleast_1d(np.asarray(self.values, dtype=float))
        if vals.ndim != 1 or vals.size < 1:
            raise ValueError("RealVector requires a 1-d sequence with at least one entry")
        if not np.all(np.isfinite(vals)):
            raise ValueError("RealVector entries must be finite")
        if not np.any(vals != 0.0):
            raise ValueError("RealVector must have at least one nonzero entry")
        object.__setattr__(self, "values", vals)

    @property
    def logical_dim(self) -> int:
        return self.values.size


def as_real_vector(v) -> RealVector:
    return v if isinstance(v, RealVector) else RealVector(np.asarray(v, dtype=float))


@dataclass(frozen=True)
class EncodedState:
    """Unit-norm real-amplitude state plus the Euclidean norm divided out.

    ``norm * state.amplitudes`` restores the zero-padded input exactly.
    """

    state: StateVector
    norm: float

    def __post_init__(self):
        if self.norm <= 0.0 or not math.isfinite(self.norm):
            raise ValueError(f"norm must be a positive finite real, got {self.norm!r}")
        if np.max(np.abs(self.state.amplitudes.imag)) > REAL_TOL:
            raise ValueError("encoded amplitudes must be real")

    @property
    def real_amplitudes(self) -> np.ndarray:
        return self.state.amplitudes.real


def _padded_dim(logical_dim: int) -> int:
    # Minimum one qubit: a logical dimension of 1 still gets a 2-dim register.
    return max(2, 1 << (logical_dim - 1).bit_length())


def normalize(v) -> EncodedState:
    """Zero-pad to a power of two and rescale to unit Euclidean norm."""
    vec = as_real_vector(v)
    vals = vec.values
    # Scale before squaring so huge feature values cannot overflow the norm.
    scale = np.max(np.abs(vals))
    norm = scale * float(np.linalg.norm(vals / scale))
    padded = np.zeros(_padded_dim(vec.logical_dim), dtype=complex)
    padded[: vec.logical_dim] = vals / norm
    n_qubits = padded.size.bit_length() - 1
    return EncodedState(StateVector(n_qubits, padded), norm)


def build_preparation_unitary(e: EncodedState) -> np.ndarray:
    """Real orthogonal matrix whose first column equals the encoded amplitudes.

    Householder reflection exchanging e_0 and the target column; the identity
    when the target already is e_0.
    """
    v = e.real_amplitudes
    u = v.copy()
    u[0] -= 1.0
    uu = float(u @ u)
    if uu < REAL_TOL:
        return np.eye(v.size)
    return np.eye(v.size) - 2.0 * np.outer(u, u) / uu


def time_feature_vectors(
    spike_moments, tau: float, tau_s: float
) -> tuple[RealVector, RealVector]:
    """Exponential time features (e^{t/tau_s} entries, e^{t/tau} entries).

    Requires tau > tau_s > 0 (otherwise the kernel normalisation
    tau_s*tau/(tau - tau_s) diverges) and entries that stay finite doubles.
    """
    if not tau > tau_s > 0.0:
        raise ValueError(f"require tau > tau_s > 0, got tau={tau}, tau_s={tau_s}")
    moments = np.atleast_1d(np.asarray(spike_moments, dtype=float))
    if moments.size == 0:
        raise ValueError("need at least one spike moment")
    if np.any(moments < 0.0):
        raise ValueError("spike moments must be non-negative")
    if np.max(moments) / tau_s > _EXP_MAX:
        raise ValueError(
            f"moment {np.max(moments)} overflows e^(t/tau_s) for tau_s={tau_s}"
        )
    return RealVector(np.exp(moments / tau_s)), RealVector(np.exp(moments / tau))
