import numpy as np
import pytest

from futureguided.errors import ConfigError, UndefinedMetricError
from futureguided.metrics import auc_roc, mse, youden_threshold


def auc_pair_counting(scores, labels):
    """Brute-force oracle: average over all (positive, negative) pairs."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    wins = (pos[:, None] > neg[None, :]).sum()
    ties = (pos[:, None] == neg[None, :]).sum()
    return (wins + 0.5 * ties) / (len(pos) * len(neg))


def youden_brute_force(scores, labels):
    """Oracle: maximum J over every distinct score used as a '>' threshold."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    best = 0.0  # the +/-inf sentinels both give J = 0
    for threshold in np.unique(scores):
        j = np.mean(pos > threshold) - np.mean(neg > threshold)
        best = max(best, j)
    return best


class TestMse:
    def test_identity(self):
        assert mse([1.0, 2.0], [1.0, 2.0]) == 0.0

    def test_arithmetic(self):
        assert mse([0.0, 0.0], [1.0, 3.0]) == 5.0

    def test_quadratic_homogeneity(self):
        rng = np.random.default_rng(0)
        targets = rng.normal(size=20)
        residuals = rng.normal(size=20)
        base = mse(targets + residuals, targets)
        doubled = mse(targets + 2 * residuals, targets)
        assert doubled == pytest.approx(4 * base, rel=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(ConfigError):
            mse([1.0], [1.0, 2.0])
        with pytest.raises(ConfigError):
            mse([], [])


class TestAuc:
    def test_textbook_example(self):
        assert auc_roc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == 0.75

    def test_perfect_separation(self):
        assert auc_roc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0

    def test_all_ties(self):
        assert auc_roc([0.5, 0.5, 0.5, 0.5], [0, 1, 0, 1]) == 0.5

    def test_single_class_rejected(self):
        with pytest.raises(UndefinedMetricError):
            auc_roc([0.1, 0.2], [1, 1])

    def test_equals_pair_counting_exactly(self):
        rng = np.random.default_rng(7)
        for _ in range(300):
            n = int(rng.integers(2, 200))
            # Coarse grid forces plenty of ties.
            scores = rng.integers(0, 10, size=n) / 10.0
            labels = rng.integers(0, 2, size=n)
            if labels.min() == labels.max():
                labels[0] = 1 - labels[0]
            assert auc_roc(scores, labels) == auc_pair_counting(scores, labels)

    def test_invariant_under_monotone_transform(self):
        rng = np.random.default_rng(8)
        scores = rng.normal(size=50)
        labels = rng.integers(0, 2, size=50)
        labels[:2] = [0, 1]
        base = auc_roc(scores, labels)
        assert auc_roc(np.exp(scores), labels) == base
        assert auc_roc(scores**3, labels) == base  # cube is strictly increasing

    def test_label_inversion_complement(self):
        rng = np.random.default_rng(9)
        scores = rng.normal(size=40)
        labels = rng.integers(0, 2, size=40)
        labels[:2] = [0, 1]
        assert auc_roc(scores, 1 - labels) == pytest.approx(
            1.0 - auc_roc(scores, labels), abs=1e-12
        )


class TestYouden:
    def test_textbook_example(self):
        point = youden_threshold([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1])
        assert point.threshold == pytest.approx(0.6)
        assert point.sensitivity == 0.5
        assert point.fpr == 0.0

    def test_perfect_separation(self):
        point = youden_threshold([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1])
        assert (point.sensitivity, point.fpr) == (1.0, 0.0)

    def test_inverted_labels_fall_back_to_sentinel(self):
        # Scores anti-correlated with labels: every real cut has J < 0, so the
        # +inf sentinel (predict nothing positive) wins with J = 0.
        point = youden_threshold([0.9, 0.8, 0.1, 0.2], [0, 0, 1, 1])
        assert point.threshold == np.inf
        assert (point.sensitivity, point.fpr) == (0.0, 0.0)

    def test_single_class_rejected(self):
        with pytest.raises(UndefinedMetricError):
            youden_threshold([0.1, 0.2], [0, 0])

    def test_matches_brute_force_scan(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            n = int(rng.integers(2, 60))
            scores = rng.integers(0, 8, size=n) / 8.0
            labels = rng.integers(0, 2, size=n)
            if labels.min() == labels.max():
                labels[0] = 1 - labels[0]
            point = youden_threshold(scores, labels)
            j = point.sensitivity - point.fpr
            assert j == pytest.approx(youden_brute_force(scores, labels), abs=1e-12)

    def test_tie_resolves_to_higher_threshold(self):
        # J = 0.5 at both 0.225 and 0.6; the higher threshold has lower FPR.
        point = youden_threshold([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1])
        assert point.threshold > 0.5
