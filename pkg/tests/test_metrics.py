import numpy as np
import pytest

import metrics
from errors import DimensionError, UndefinedMetricError
from ocsvm import ANOMALY, NORMAL


def _brute_force_ap(rel, scores):
    rel = np.asarray(rel, dtype=bool)
    total, prev_recall = 0.0, 0.0
    for t in sorted(set(scores.tolist()), reverse=True):
        flagged = scores >= t
        tp = np.sum(flagged & rel)
        recall = tp / rel.sum()
        total += (recall - prev_recall) * tp / flagged.sum()
        prev_recall = recall
    return total


def test_prf1_examples():
    y = np.array([ANOMALY, NORMAL, ANOMALY, NORMAL])
    assert metrics.prf1(y, y) == (1.0, 1.0, 1.0)

    y = np.array([ANOMALY] * 6 + [NORMAL] * 4)
    p = np.array([ANOMALY] * 3 + [NORMAL] * 3 + [ANOMALY] + [NORMAL] * 3)
    assert metrics.confusion(y, p) == (3, 1, 3, 3)
    precision, recall, f1 = metrics.prf1(y, p)
    assert (precision, recall) == (0.75, 0.5)
    assert f1 == pytest.approx(0.6)


def test_f1_equals_precision_when_recall_does():
    y = np.array([ANOMALY, ANOMALY, NORMAL, NORMAL])
    p = np.array([ANOMALY, NORMAL, ANOMALY, NORMAL])
    precision, recall, f1 = metrics.prf1(y, p)
    assert precision == recall == pytest.approx(f1)


def test_zero_division_reports_zero():
    y = np.array([ANOMALY, NORMAL])
    assert metrics.prf1(y, np.array([NORMAL, NORMAL])) == (0.0, 0.0, 0.0)
    with pytest.raises(DimensionError):
        metrics.prf1(y, np.array([NORMAL]))


def test_average_precision_examples():
    assert metrics.average_precision([1, 0, 1, 0], [0.9, 0.8, 0.7, 0.1]) == pytest.approx(0.8333, abs=1e-4)
    assert metrics.average_precision([1, 1, 0, 0], [0.9, 0.8, 0.7, 0.1]) == 1.0
    assert metrics.average_precision([1, 0, 0, 1, 0], np.full(5, 0.3)) == pytest.approx(0.4)
    with pytest.raises(UndefinedMetricError):
        metrics.average_precision([0, 0, 0], [0.1, 0.2, 0.3])


def test_average_precision_matches_brute_force():
    rng = np.random.default_rng(0)
    for _ in range(200):
        n = int(rng.integers(2, 21))
        rel = rng.integers(0, 2, size=n)
        if rel.sum() == 0:
            rel[rng.integers(n)] = 1
        scores = rng.integers(0, 6, size=n).astype(float)  # plenty of ties
        assert abs(metrics.average_precision(rel, scores) - _brute_force_ap(rel, scores)) <= 1e-12


def test_prf1_matches_hand_counts(rng):
    for _ in range(20):
        y = rng.choice([ANOMALY, NORMAL], size=30)
        p = rng.choice([ANOMALY, NORMAL], size=30)
        tp = int(np.sum((y == ANOMALY) & (p == ANOMALY)))
        fp = int(np.sum((y == NORMAL) & (p == ANOMALY)))
        fn = int(np.sum((y == ANOMALY) & (p == NORMAL)))
        assert metrics.confusion(y, p) == (tp, fp, 30 - tp - fp - fn, fn)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        assert metrics.prf1(y, p) == pytest.approx((precision, recall, f1), abs=1e-12)


def test_average_precision_invariances(rng):
    rel = rng.integers(0, 2, size=50)
    rel[0] = 1
    scores = rng.normal(size=50)
    ap = metrics.average_precision(rel, scores)
    assert metrics.average_precision(rel, np.exp(scores)) == pytest.approx(ap, abs=1e-12)
    perm = rng.permutation(50)
    assert metrics.average_precision(rel[perm], scores[perm]) == pytest.approx(ap, abs=1e-12)


def test_evaluate_ranks_by_negated_decision_score():
    labels = np.array([ANOMALY, NORMAL, NORMAL, ANOMALY])
    decision = np.array([-0.5, 0.2, 0.3, -0.1])
    report = metrics.evaluate(labels, decision)
    assert report.average_precision == 1.0
    assert (report.tp, report.fp, report.tn, report.fn) == (2, 0, 2, 0)
    assert report.anomaly_ratio == 0.5
    assert report.n == 4
    assert report.to_record()["f1"] == 1.0
