"""Spiking neuron: kernel dynamics, closed-form peak localisation, learning.

The membrane potential is a weighted sum of causal double-exponential
kernels K(dt) = V0 (e^{-dt/tau} - e^{-dt/tau_s}), V0 = tau_s*tau/(tau-tau_s).
For the first J spikes (time order) the potential's stationary point has the
closed form

    t* = V0 [ ln(tau/tau_s) + ln(w . t_s) - ln(w . t) ]

with exponential time features t_s, t from :mod:`qsnn.encode`.  Both dot
products must be positive for the logarithms to exist; the inner-product
provider is pluggable so the products can come from an exact dot product or
from the quantum estimator.  When a prefix violates the sign constraint the
closed form is abandoned for that prefix and a grid search over the spike's
segment stands in (counted in the report).

An output spike is emitted at every in-window stationary point whose
prefix potential reaches the threshold.  Learning is a tempotron-style
correction at the potential's peak (the update rule follows the cited
tempotron literature; it is isolated here so alternatives can be swapped).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .encode import time_feature_vectors
from .quip import QuipConfig, QuipResult, UnsignedProductError, run_quip

FALLBACK_GRID = 4096


@dataclass(frozen=True)
class NeuronParams:
    """Kernel decay times, firing threshold, rest level, observation period."""

    tau: float
    tau_s: float
    v_thr: float
    T: float
    v_rest: float = 0.0

    def __post_init__(self):
        if not self.tau > self.tau_s > 0.0:
            raise ValueError(f"require tau > tau_s > 0, got {self.tau}, {self.tau_s}")
        if self.T <= 0.0:
            raise ValueError("observation period must be positive")

    @property
    def v0(self) -> float:
        return self.tau_s * self.tau / (self.tau - self.tau_s)


@dataclass(frozen=True)
class SpikeConfig:
    """Input stimuli: (synapse, moment) events plus one weight per synapse."""

    synapse_count: int
    spikes: tuple[tuple[int, float], ...]
    weights: np.ndarray

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=float)
        if weights.shape != (self.synapse_count,):
            raise ValueError(
                f"expected {self.synapse_count} weights, got shape {weights.shape}"
            )
        spikes = tuple((int(k), float(t)) for k, t in self.spikes)
        for k, t in spikes:
            if not 0 <= k < self.synapse_count:
                raise ValueError(f"synapse index {k} out of range")
            if t < 0.0:
                raise ValueError(f"spike moment {t} must be non-negative")
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "spikes", spikes)


@dataclass(frozen=True)
class LocalMaximum:
    """Stationary point of one prefix potential."""

    t_star: float
    potential: float
    prefix: int
    in_window: bool
    used_fallback: bool = False


@dataclass(frozen=True)
class CrossingReport:
    """All prefix maxima, the threshold crossings among them, and diagnostics."""

    local_maxima: tuple[LocalMaximum, ...]
    output_spikes: tuple[float, ...]
    fired: bool
    fallback_count: int


@dataclass(frozen=True)
class ProductEstimate:
    """Unsigned inner product recovered from a provider.

    ``value`` is the raw product; ``log_value`` is its logarithm computed
    from the normalised estimate and the two vector norms, which stays
    finite even when the raw product overflows a double.
    """

    value: float
    normalized: float
    w_norm: float
    t_norm: float
    log_value: float
    detail: QuipResult | None = None


class ExactInnerProduct:
    """Classical provider: the plain dot product, rejected when not positive."""

    name = "exact"

    def product(self, w: np.ndarray, t: np.ndarray) -> ProductEstimate:
        value = float(np.dot(w, t))
        if value <= 0.0:
            raise UnsignedProductError(f"inner product {value:.6g} is not positive")
        w_norm = float(np.linalg.norm(w))
        t_norm = _stable_norm(t)
        normalized = value / (w_norm * t_norm) if math.isfinite(w_norm * t_norm) else 0.0
        return ProductEstimate(
            value=value,
            normalized=normalized,
            w_norm=w_norm,
            t_norm=t_norm,
            log_value=math.log(value),
        )


class QuipInnerProduct:
    """Quantum provider: runs the amplitude-estimation readout per product.

    The sign of the exact product is checked classically before encoding
    (the estimator itself is sign-blind); violations raise the same error
    the exact provider raises, so callers fall back identically.
    """

    name = "quip"

    def __init__(self, cfg: QuipConfig, rng: np.random.Generator | None = None):
        self.cfg = cfg
        self.rng = rng if rng is not None else np.random.default_rng(cfg.seed)

    def product(self, w: np.ndarray, t: np.ndarray) -> ProductEstimate:
        exact = float(np.dot(w, t))
        if exact <= 0.0:
            raise UnsignedProductError(f"inner product {exact:.6g} is not positive")
        result = run_quip(w, t, self.cfg, self.rng)
        w_norm = float(np.linalg.norm(w))
        t_norm = _stable_norm(t)
        est = result.inner_product
        if est <= 0.0:
            raise UnsignedProductError(
                f"estimated product decoded to {est:.6g}; cannot take its logarithm"
            )
        return ProductEstimate(
            value=est * w_norm * t_norm,
            normalized=est,
            w_norm=w_norm,
            t_norm=t_norm,
            log_value=math.log(est) + math.log(w_norm) + math.log(t_norm),
            detail=result,
        )


def _stable_norm(v: np.ndarray) -> float:
    # Exponential time features can dwarf 1e154; scale before squaring.
    peak = float(np.max(np.abs(v)))
    if peak == 0.0:
        return 0.0
    return peak * float(np.linalg.norm(v / peak))


def kernel(dt, params: NeuronParams):
    """Causal spike kernel; zero for dt < 0, zero at dt = 0, decays to zero."""
    dt = np.asarray(dt, dtype=float)
    out = params.v0 * (np.exp(-dt / params.tau) - np.exp(-dt / params.tau_s))
    out = np.where(dt >= 0.0, out, 0.0)
    return out if out.ndim else float(out)


def kernel_peak_offset(params: NeuronParams) -> float:
    """Delay from a single spike to its kernel maximum: V0 ln(tau/tau_s)."""
    return params.v0 * math.log(params.tau / params.tau_s)


def sorted_spikes(config: SpikeConfig) -> tuple[np.ndarray, np.ndarray]:
    """Spike moments ascending and the weight of each spike's synapse."""
    if not config.spikes:
        return np.empty(0), np.empty(0)
    moments = np.array([t for _, t in config.spikes])
    weights = np.array([config.weights[k] for k, _ in config.spikes])
    order = np.argsort(moments, kind="stable")
    return moments[order], weights[order]


def potential(t: float, config: SpikeConfig, params: NeuronParams) -> float:
    """Membrane potential at time t: weighted causal kernels plus rest level."""
    moments = np.array([m for _, m in config.spikes])
    weights = np.array([config.weights[k] for k, _ in config.spikes])
    if moments.size == 0:
        return params.v_rest
    return params.v_rest + float(np.sum(weights * kernel(t - moments, params)))


def prefix_potential(
    t: float, config: SpikeConfig, params: NeuronParams, prefix: int
) -> float:
    """Potential restricted to the first ``prefix`` spikes in time order."""
    moments, weights = sorted_spikes(config)
    _check_prefix(prefix, moments.size)
    m, w = moments[:prefix], weights[:prefix]
    return params.v_rest + float(np.sum(w * kernel(t - m, params)))


def potential_derivative(
    t: float, prefix: int, config: SpikeConfig, params: NeuronParams
) -> float:
    """Time derivative of the prefix potential (valid past its spikes)."""
    moments, weights = sorted_spikes(config)
    _check_prefix(prefix, moments.size)
    m, w = moments[:prefix], weights[:prefix]
    dt = t - m
    slow = np.exp(-dt / params.tau_s) / params.tau_s
    fast = np.exp(-dt / params.tau) / params.tau
    return params.v0 * float(np.sum(w * (slow - fast)))


def _check_prefix(prefix: int, n_spikes: int) -> None:
    if not 1 <= prefix <= n_spikes:
        raise ValueError(f"prefix {prefix} out of range for {n_spikes} spikes")


def local_max_moment(
    prefix: int, config: SpikeConfig, params: NeuronParams, provider
) -> tuple[float, bool]:
    """Closed-form stationary moment of the prefix potential.

    Both inner products come from the provider; the logarithmic form keeps
    the arithmetic finite for huge time features.  Returns (t*, in_window)
    where the window is [last prefix spike, T]; raises UnsignedProductError
    (tagged with the prefix) when either product is not positive.
    """
    moments, weights = sorted_spikes(config)
    _check_prefix(prefix, moments.size)
    m, w = moments[:prefix], weights[:prefix]
    t_slow, t_fast = time_feature_vectors(m, params.tau, params.tau_s)
    try:
        slow = provider.product(w, t_slow.values)
        fast = provider.product(w, t_fast.values)
    except UnsignedProductError as err:
        raise UnsignedProductError(str(err), prefix=prefix) from None
    t_star = params.v0 * (
        math.log(params.tau / params.tau_s) + slow.log_value - fast.log_value
    )
    in_window = m[-1] <= t_star <= params.T
    return t_star, in_window


def _fallback_max(
    prefix: int, config: SpikeConfig, params: NeuronParams
) -> tuple[float, float]:
    """Grid argmax of the prefix potential over its segment [t_J, next spike)."""
    moments, weights = sorted_spikes(config)
    lo = moments[prefix - 1]
    hi = moments[prefix] if prefix < moments.size else params.T
    if hi <= lo:
        hi = min(lo + params.tau, params.T) if params.T > lo else lo
    grid = np.linspace(lo, max(hi, lo), FALLBACK_GRID)
    m, w = moments[:prefix], weights[:prefix]
    values = params.v_rest + (w[:, None] * kernel(grid[None, :] - m[:, None], params)).sum(axis=0)
    best = int(np.argmax(values))
    return float(grid[best]), float(values[best])


def detect_crossings(config: SpikeConfig, params: NeuronParams, provider) -> CrossingReport:
    """Scan every spike prefix for a potential peak and threshold crossing.

    Emits an output spike at each in-window peak whose prefix potential
    reaches the threshold; out-of-window stationary points are recorded but
    never fire.  Prefixes whose products violate the sign constraint fall
    back to a grid search (counted).
    """
    moments, _ = sorted_spikes(config)
    maxima: list[LocalMaximum] = []
    crossings: list[float] = []
    fallback_count = 0
    for prefix in range(1, moments.size + 1):
        try:
            t_star, in_window = local_max_moment(prefix, config, params, provider)
            v_star = prefix_potential(t_star, config, params, prefix)
            used_fallback = False
        except UnsignedProductError:
            t_star, v_star = _fallback_max(prefix, config, params)
            in_window = True
            used_fallback = True
            fallback_count += 1
        maxima.append(LocalMaximum(t_star, v_star, prefix, in_window, used_fallback))
        if in_window and v_star >= params.v_thr:
            crossings.append(t_star)
    crossings.sort()
    return CrossingReport(
        local_maxima=tuple(maxima),
        output_spikes=tuple(crossings),
        fired=bool(crossings),
        fallback_count=fallback_count,
    )


def _psp_per_synapse(t: float, config: SpikeConfig, params: NeuronParams) -> np.ndarray:
    """Summed kernel contribution of each synapse's past spikes at time t."""
    psp = np.zeros(config.synapse_count)
    for k, moment in config.spikes:
        if moment <= t:
            psp[k] += float(kernel(t - moment, params))
    return psp


def _peak_moment(config: SpikeConfig, params: NeuronParams, report: CrossingReport) -> float:
    candidates = [lm for lm in report.local_maxima if lm.in_window] or list(report.local_maxima)
    if candidates:
        return max(candidates, key=lambda lm: lm.potential).t_star
    grid = np.linspace(0.0, params.T, FALLBACK_GRID)
    values = np.array([potential(t, config, params) for t in grid])
    return float(grid[int(np.argmax(values))])


def tempotron_update(
    config: SpikeConfig,
    params: NeuronParams,
    label_fire: bool,
    report: CrossingReport,
    lr: float,
) -> np.ndarray:
    """One error-driven weight correction; returns the new weight vector.

    Misses (should fire, did not) add lr-scaled kernel contributions at the
    potential's peak moment; false alarms subtract them at the first
    crossing.  Correct outputs leave the weights untouched.
    """
    weights = config.weights.copy()
    if label_fire == report.fired:
        return weights
    if label_fire:
        t_m = _peak_moment(config, params, report)
        weights += lr * _psp_per_synapse(t_m, config, params)
    else:
        t_c = report.output_spikes[0]
        weights -= lr * _psp_per_synapse(t_c, config, params)
    return weights


def with_weights(config: SpikeConfig, weights: np.ndarray) -> SpikeConfig:
    return replace(config, weights=np.asarray(weights, dtype=float))


def exact_provider() -> ExactInnerProduct:
    return ExactInnerProduct()


def quip_provider(
    m: int = 10, q: int = 11, seed: int = 0, mode: str = "analytic", slack: bool = True
) -> QuipInnerProduct:
    return QuipInnerProduct(QuipConfig(m=m, q=q, slack=slack, mode=mode, seed=seed))
