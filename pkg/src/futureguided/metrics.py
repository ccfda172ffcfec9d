"""Evaluation metrics: regression MSE and ranking metrics for binary scores."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import ConfigError, UndefinedMetricError


class ScoredLabels(NamedTuple):
    scores: np.ndarray
    labels: np.ndarray  # binary {0, 1}


class OperatingPoint(NamedTuple):
    threshold: float
    sensitivity: float
    fpr: float


def mse(predictions: np.ndarray, targets: np.ndarray) -> float:
    predictions = np.asarray(predictions, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if predictions.shape != targets.shape or predictions.size == 0:
        raise ConfigError(
            f"need equal nonzero lengths, got {predictions.shape} and {targets.shape}"
        )
    return float(np.mean((predictions - targets) ** 2))


def _split_classes(scores: np.ndarray, labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape:
        raise ConfigError("scores and labels must have equal length")
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    if len(pos) == 0 or len(neg) == 0:
        raise UndefinedMetricError("metric needs at least one positive and one negative")
    return pos, neg


def auc_roc(scores: np.ndarray, labels: np.ndarray) -> float:
    """Probability that a random positive outranks a random negative; ties count 1/2.

    Computed from midranks, which equals pair counting exactly (all the
    intermediate quantities are half-integers, representable without rounding).
    """
    pos, neg = _split_classes(scores, labels)
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    _, inverse, counts = np.unique(scores, return_inverse=True, return_counts=True)
    upper = np.cumsum(counts)
    midranks = (upper - (counts - 1) / 2.0)[inverse]
    n_pos, n_neg = len(pos), len(neg)
    rank_sum = midranks[labels == 1].sum()
    return float((rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def youden_threshold(scores: np.ndarray, labels: np.ndarray) -> OperatingPoint:
    """Operating point maximizing J = sensitivity - FPR.

    Candidate thresholds are the midpoints between adjacent distinct scores
    plus -inf/+inf sentinels; a sample is called positive when its score is
    strictly above the threshold. Ties in J resolve to the higher threshold
    (the lower-FPR operating point).
    """
    pos, neg = _split_classes(scores, labels)
    distinct = np.unique(np.asarray(scores, dtype=np.float64))
    midpoints = (distinct[:-1] + distinct[1:]) / 2.0
    candidates = np.concatenate(([-np.inf], midpoints, [np.inf]))

    pos_sorted = np.sort(pos)
    neg_sorted = np.sort(neg)
    sens = 1.0 - np.searchsorted(pos_sorted, candidates, side="right") / len(pos)
    fpr = 1.0 - np.searchsorted(neg_sorted, candidates, side="right") / len(neg)
    j = sens - fpr

    best = 0
    for k in range(1, len(candidates)):
        if j[k] >= j[best]:  # >= so ties move toward the higher threshold
            best = k
    return OperatingPoint(
        threshold=float(candidates[best]),
        sensitivity=float(sens[best]),
        fpr=float(fpr[best]),
    )
