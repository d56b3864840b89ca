"""Quantum-accelerated spiking neural network toolkit.

A desk-scale state-vector simulator, amplitude encoding, the swap test, an
amplitude-estimation readout of unsigned inner products with closed-form
success and accuracy figures, a tempotron spiking neuron whose potential
peaks are localised through those products, and an experiment CLI.
"""

__version__ = "0.1.0"

from .encode import EncodedState, RealVector, normalize, time_feature_vectors
from .quip import (
    QuipConfig,
    QuipResult,
    UnsignedProductError,
    decode_measurement,
    majority_vote_probability,
    outcome_distribution,
    run_quip,
    slack_probability,
    success_probability,
)
from .snn import (
    CrossingReport,
    NeuronParams,
    SpikeConfig,
    detect_crossings,
    exact_provider,
    kernel,
    potential,
    quip_provider,
    tempotron_update,
)
from .statevec import MeasurementSample, QubitSpan, StateVector, init_basis

__all__ = [
    "__version__",
    "CrossingReport",
    "EncodedState",
    "MeasurementSample",
    "NeuronParams",
    "QubitSpan",
    "QuipConfig",
    "QuipResult",
    "RealVector",
    "SpikeConfig",
    "StateVector",
    "UnsignedProductError",
    "decode_measurement",
    "detect_crossings",
    "exact_provider",
    "init_basis",
    "kernel",
    "majority_vote_probability",
    "normalize",
    "outcome_distribution",
    "potential",
    "quip_provider",
    "run_quip",
    "slack_probability",
    "success_probability",
    "tempotron_update",
    "time_feature_vectors",
]
