"""Equal-width discretization of real targets into class bins, and back.

Quantization turns forecasting into classification over ``n_bins`` classes so
that output distributions can be compared and distilled; predictions are
recovered from the bin centers either by argmax or by expectation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateRangeError, DomainError

READOUTS = ("argmax", "expectation")

PROB_SUM_TOL = 1e-9


@dataclass(frozen=True)
class BinSpec:
    """Partition of [lo, hi] into n_bins equal-width intervals."""

    n_bins: int
    lo: float
    hi: float

    def __post_init__(self) -> None:
        if self.n_bins < 2:
            raise DomainError(f"n_bins must be >= 2, got {self.n_bins}")
        if not self.hi > self.lo:
            raise DegenerateRangeError(f"need hi > lo, got [{self.lo}, {self.hi}]")

    @property
    def width(self) -> float:
        return (self.hi - self.lo) / self.n_bins

    def centers(self) -> np.ndarray:
        return self.lo + (np.arange(self.n_bins) + 0.5) * self.width


def fit_bins(train_values: np.ndarray, n_bins: int) -> BinSpec:
    """Fit the bin range to the training split only.

    Out-of-range values seen later (validation/test) clamp to the edge bins,
    which avoids leaking future data into the discretization.
    """
    values = np.asarray(train_values, dtype=np.float64)
    if values.size < 2:
        raise DegenerateRangeError("need at least 2 values to fit a range")
    lo, hi = float(values.min()), float(values.max())
    if hi <= lo:
        raise DegenerateRangeError(f"constant series: range [{lo}, {hi}] is degenerate")
    return BinSpec(n_bins=n_bins, lo=lo, hi=hi)


def quantize(x: float, spec: BinSpec) -> int:
    """Index of the bin containing x, clamped to [0, n_bins) outside the range."""
    if not math.isfinite(x):
        raise DomainError(f"cannot quantize non-finite value {x}")
    idx = int(math.floor((x - spec.lo) / spec.width))
    return min(max(idx, 0), spec.n_bins - 1)


def quantize_array(xs: np.ndarray, spec: BinSpec) -> np.ndarray:
    """Vectorized ``quantize``; returns int64 labels."""
    xs = np.asarray(xs, dtype=np.float64)
    if not np.isfinite(xs).all():
        raise DomainError("cannot quantize non-finite values")
    idx = np.floor((xs - spec.lo) / spec.width).astype(np.int64)
    return np.clip(idx, 0, spec.n_bins - 1)


def validate_probs(probs: np.ndarray, n_bins: int) -> np.ndarray:
    probs = np.asarray(probs, dtype=np.float64)
    if probs.shape != (n_bins,):
        raise DomainError(f"expected {n_bins} probabilities, got shape {probs.shape}")
    if probs.min() < 0 or abs(probs.sum() - 1.0) > PROB_SUM_TOL:
        raise DomainError("not a probability vector")
    return probs


def dequantize_argmax(probs: np.ndarray, spec: BinSpec) -> float:
    """Center of the most probable bin; ties break to the lowest index."""
    probs = validate_probs(probs, spec.n_bins)
    return float(spec.centers()[int(np.argmax(probs))])


def dequantize_expectation(probs: np.ndarray, spec: BinSpec) -> float:
    """Expected value over bin centers."""
    probs = validate_probs(probs, spec.n_bins)
    return float(probs @ spec.centers())


def readout_values(probs: np.ndarray, spec: BinSpec, readout: str) -> np.ndarray:
    """Batch readout for a (n, n_bins) probability matrix."""
    if readout not in READOUTS:
        raise DomainError(f"unknown readout {readout!r}, expected one of {READOUTS}")
    probs = np.atleast_2d(np.asarray(probs, dtype=np.float64))
    centers = spec.centers()
    if readout == "argmax":
        return centers[np.argmax(probs, axis=1)]
    return probs @ centers


def one_hot(label: int, n_bins: int) -> np.ndarray:
    if not 0 <= label < n_bins:
        raise DomainError(f"label {label} outside [0, {n_bins})")
    vec = np.zeros(n_bins, dtype=np.float64)
    vec[label] = 1.0
    return vec
