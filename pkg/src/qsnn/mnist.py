"""IDX image ingestion and the 25-synapse stimulus encoding pipeline.

Encoding of one 28x28 grayscale image:

1. binarise at intensity > 127;
2. 2x2 max pooling down to 14x14 (max keeps stroke presence);
3. pad one zero row at the bottom and one zero column at the right -> 15x15;
4. split into 25 disjoint 3x3 blocks, row-major;
5. block i becomes stimulus moment t_i = sum_k 2^k * bit_k with bit order
   row-major inside the block (top-left is bit 0), so t_i in [0, 511];
   an all-zero block emits no stimulus.

The observation period T = 512 makes every moment fit the window.  Training
is plain error-driven tempotron learning over spike configurations built
from the encoded moments; the firing threshold is calibrated once as the
median peak potential of a few training samples under the initial weights.
"""
from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .snn import (
    CrossingReport,
    NeuronParams,
    SpikeConfig,
    detect_crossings,
    tempotron_update,
    with_weights,
)

MAGIC_IMAGES = 2051
MAGIC_LABELS = 2049
IMAGE_SIDE = 28
SYNAPSES = 25
PERIOD = 512.0

DEFAULT_PARAMS = NeuronParams(tau=15.0, tau_s=3.75, v_thr=1.0, T=PERIOD)


class IdxFormatError(ValueError):
    """Base for IDX container problems."""


class IdxBadMagicError(IdxFormatError):
    pass


class IdxTruncatedError(IdxFormatError):
    pass


class IdxCountMismatchError(IdxFormatError):
    pass


@dataclass(frozen=True)
class RawImage:
    pixels: np.ndarray  # 28x28 uint8
    label: int

    def __post_init__(self):
        pixels = np.asarray(self.pixels, dtype=np.uint8)
        if pixels.shape != (IMAGE_SIDE, IMAGE_SIDE):
            raise ValueError(f"expected {IMAGE_SIDE}x{IMAGE_SIDE} pixels, got {pixels.shape}")
        if not 0 <= self.label <= 9:
            raise ValueError(f"label must be a digit, got {self.label}")
        object.__setattr__(self, "pixels", pixels)


@dataclass(frozen=True)
class EncodedSample:
    """One stimulus moment (or None) per synapse, plus the binary label."""

    moments: tuple[int | None, ...]
    label: int

    def __post_init__(self):
        if len(self.moments) != SYNAPSES:
            raise ValueError(f"expected {SYNAPSES} synapse slots")
        for t in self.moments:
            if t is not None and not 0 <= t <= 511:
                raise ValueError(f"stimulus moment {t} outside [0, 511]")


def _open_maybe_gzip(path: Path):
    with open(path, "rb") as fh:
        head = fh.read(2)
    if head == b"\x1f\x8b":
        return gzip.open(path, "rb")
    return open(path, "rb")


def _read_exact(fh, count: int, offset: int, path: Path) -> bytes:
    data = fh.read(count)
    if len(data) != count:
        raise IdxTruncatedError(
            f"{path}: truncated at byte {offset + len(data)} (expected {count} more bytes)"
        )
    return data


def load_idx(images_path, labels_path) -> list[RawImage]:
    """Parse big-endian IDX image/label files (raw or gzipped) into RawImages."""
    images_path, labels_path = Path(images_path), Path(labels_path)
    with _open_maybe_gzip(images_path) as fh:
        header = _read_exact(fh, 16, 0, images_path)
        magic, count, rows, cols = struct.unpack(">IIII", header)
        if magic != MAGIC_IMAGES:
            raise IdxBadMagicError(f"{images_path}: magic {magic}, expected {MAGIC_IMAGES}")
        if (rows, cols) != (IMAGE_SIDE, IMAGE_SIDE):
            raise IdxFormatError(f"{images_path}: {rows}x{cols} images, expected 28x28")
        payload = _read_exact(fh, count * rows * cols, 16, images_path)
    pixels = np.frombuffer(payload, dtype=np.uint8).reshape(count, rows, cols)

    with _open_maybe_gzip(labels_path) as fh:
        header = _read_exact(fh, 8, 0, labels_path)
        magic, label_count = struct.unpack(">II", header)
        if magic != MAGIC_LABELS:
            raise IdxBadMagicError(f"{labels_path}: magic {magic}, expected {MAGIC_LABELS}")
        labels = np.frombuffer(_read_exact(fh, label_count, 8, labels_path), dtype=np.uint8)

    if label_count != count:
        raise IdxCountMismatchError(
            f"{count} images in {images_path} but {label_count} labels in {labels_path}"
        )
    return [RawImage(pixels[i], int(labels[i])) for i in range(count)]


def filter_binary(images: list[RawImage]) -> list[RawImage]:
    """Keep only digits 0 and 1."""
    return [img for img in images if img.label in (0, 1)]


def encode_image(img: RawImage) -> EncodedSample:
    """Binarise, pool, pad and pack 3x3 blocks into stimulus moments."""
    binary = (img.pixels > 127).astype(np.uint16)
    pooled = binary.reshape(14, 2, 14, 2).max(axis=(1, 3))
    padded = np.pad(pooled, ((0, 1), (0, 1)))
    blocks = padded.reshape(5, 3, 5, 3).transpose(0, 2, 1, 3).reshape(SYNAPSES, 9)
    codes = blocks @ (1 << np.arange(9, dtype=np.uint16))
    present = blocks.any(axis=1)
    moments = tuple(int(c) if p else None for c, p in zip(codes, present))
    return EncodedSample(moments, img.label)


def to_spike_config(sample: EncodedSample, weights: np.ndarray) -> SpikeConfig:
    spikes = tuple(
        (k, float(t)) for k, t in enumerate(sample.moments) if t is not None
    )
    return SpikeConfig(SYNAPSES, spikes, np.asarray(weights, dtype=float))


@dataclass(frozen=True)
class TrainResult:
    weights: np.ndarray
    params: NeuronParams
    trace: tuple[dict, ...]  # per-epoch rows: epoch, train_acc, test_acc


@dataclass(frozen=True)
class EvalResult:
    accuracy: float
    true_positive: int
    true_negative: int
    false_positive: int
    false_negative: int

    @property
    def confusion(self) -> np.ndarray:
        return np.array(
            [[self.true_negative, self.false_positive],
             [self.false_negative, self.true_positive]]
        )


def _predict(sample: EncodedSample, weights, params, provider) -> tuple[bool, CrossingReport]:
    if all(t is None for t in sample.moments):
        return False, CrossingReport((), (), False, 0)
    report = detect_crossings(to_spike_config(sample, weights), params, provider)
    return report.fired, report


def evaluate(samples, weights, params: NeuronParams, provider) -> EvalResult:
    """Accuracy and 2x2 confusion counts; firing predicts label 1."""
    tp = tn = fp = fn = 0
    for sample in samples:
        fired, _ = _predict(sample, weights, params, provider)
        actual = sample.label == 1
        if fired and actual:
            tp += 1
        elif fired and not actual:
            fp += 1
        elif not fired and actual:
            fn += 1
        else:
            tn += 1
    total = max(len(samples), 1)
    return EvalResult((tp + tn) / total, tp, tn, fp, fn)


def calibrate_threshold(
    samples, weights, params: NeuronParams, provider, count: int = 50
) -> float:
    """Median peak potential over the first ``count`` samples (0.0 if flat)."""
    peaks = []
    for sample in samples[:count]:
        if all(t is None for t in sample.moments):
            continue
        report = detect_crossings(to_spike_config(sample, weights), params, provider)
        usable = [lm for lm in report.local_maxima if lm.in_window]
        if usable:
            peaks.append(max(lm.potential for lm in usable))
    return float(np.median(peaks)) if peaks else 0.0


def train_binary(
    train_samples,
    test_samples,
    params: NeuronParams,
    provider,
    epochs: int = 20,
    lr: float = 0.02,
    seed: int = 0,
    calibration_samples: int = 50,
) -> TrainResult:
    """Error-driven training; returns weights and a per-epoch accuracy trace.

    The trace (and therefore the weights) is reproducible bit for bit from
    the seed: initial weights, shuffles and nothing else consume the rng.
    """
    if not train_samples:
        raise ValueError("empty training set")
    if epochs < 1:
        raise ValueError("need at least one epoch")
    if any(sample.label not in (0, 1) for sample in train_samples):
        raise ValueError("training labels must be binary (filter digits first)")
    rng = np.random.default_rng(seed)
    weights = rng.normal(0.1, 0.02, size=SYNAPSES)
    v_thr = calibrate_threshold(train_samples, weights, params, provider, calibration_samples)
    params = replace(params, v_thr=v_thr)
    trace = []
    for epoch in range(1, epochs + 1):
        order = rng.permutation(len(train_samples))
        for idx in order:
            sample = train_samples[idx]
            fired, report = _predict(sample, weights, params, provider)
            label_fire = sample.label == 1
            if fired != label_fire and report.local_maxima:
                config = to_spike_config(sample, weights)
                weights = tempotron_update(config, params, label_fire, report, lr)
        train_acc = evaluate(train_samples, weights, params, provider).accuracy
        test_acc = evaluate(test_samples, weights, params, provider).accuracy
        trace.append({"epoch": epoch, "train_acc": train_acc, "test_acc": test_acc})
    return TrainResult(weights, params, tuple(trace))


def train_one_vs_rest(
    samples_by_digit: dict[int, list[EncodedSample]],
    params: NeuronParams,
    provider,
    epochs: int = 10,
    lr: float = 0.02,
    seed: int = 0,
) -> dict[int, TrainResult]:
    """Thin multi-class loop: one binary neuron per digit against the rest.

    Untuned convenience wrapper; the supported task is the binary one.
    """
    results = {}
    for digit, positives in sorted(samples_by_digit.items()):
        rest = [s for d, group in samples_by_digit.items() if d != digit for s in group]
        relabeled = [replace(s, label=1) for s in positives] + [
            replace(s, label=0) for s in rest
        ]
        results[digit] = train_binary(
            relabeled, relabeled, params, provider, epochs=epochs, lr=lr, seed=seed
        )
    return results
