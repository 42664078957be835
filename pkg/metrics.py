# metrics.py
"""
Precision, recall, F1 and average precision with the anomaly as the
positive class, on top of sklearn.metrics.
"""
import logging
from dataclasses import asdict, dataclass
from typing import Tuple

import numpy as np
from sklearn.metrics import average_precision_score, confusion_matrix, precision_recall_fscore_support

from errors import DimensionError, UndefinedMetricError
from ocsvm import ANOMALY, NORMAL, predict

logger = logging.getLogger(__name__)


@dataclass
class EvalReport:
    precision: float
    recall: float
    f1: float
    average_precision: float
    tp: int
    fp: int
    tn: int
    fn: int
    anomaly_ratio: float
    zero_division: bool = False

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def to_record(self) -> dict:
        return asdict(self)


def _labels(labels_true, labels_pred) -> Tuple[np.ndarray, np.ndarray]:
    y = np.asarray(labels_true)
    p = np.asarray(labels_pred)
    if y.shape != p.shape or y.ndim != 1:
        raise DimensionError(f"label vectors differ in shape: {y.shape} vs {p.shape}")
    return y, p


def confusion(labels_true, labels_pred) -> Tuple[int, int, int, int]:
    """(tp, fp, tn, fn) on +1 / -1 labels."""
    y, p = _labels(labels_true, labels_pred)
    tn, fp, fn, tp = confusion_matrix(y, p, labels=[NORMAL, ANOMALY]).ravel()
    return int(tp), int(fp), int(tn), int(fn)


def _prf1(y: np.ndarray, p: np.ndarray) -> Tuple[float, float, float]:
    precision, recall, f1, _ = precision_recall_fscore_support(
        y, p, labels=[ANOMALY], average=None, zero_division=0,
    )
    return float(precision[0]), float(recall[0]), float(f1[0])


def prf1(labels_true, labels_pred) -> Tuple[float, float, float]:
    y, p = _labels(labels_true, labels_pred)
    tp, fp, _, fn = confusion(y, p)
    if tp + fp == 0 or tp + fn == 0:
        logger.debug("prf1: zero denominator (tp=%d fp=%d fn=%d), reporting 0", tp, fp, fn)
    return _prf1(y, p)


def average_precision(is_anomaly, anomaly_scores) -> float:
    """
    Step-wise area under the precision-recall curve.

    `is_anomaly` is a 0/1 (or boolean) relevance vector, higher scores mean
    more anomalous. Each distinct score is one threshold, so tied points enter
    together.
    """
    rel = np.asarray(is_anomaly).astype(bool)
    scores = np.asarray(anomaly_scores, dtype=float)
    if rel.shape != scores.shape or rel.ndim != 1:
        raise DimensionError(f"labels {rel.shape} and scores {scores.shape} differ in shape")
    if not rel.any():
        raise UndefinedMetricError("average precision is undefined without any anomaly")
    return float(average_precision_score(rel.astype(int), scores))


def anomaly_scores(decision_scores) -> np.ndarray:
    """Lower decision values are more anomalous, so rank by the negation."""
    return -np.asarray(decision_scores, dtype=float)


def evaluate(labels_true, decision_scores) -> EvalReport:
    y = np.asarray(labels_true)
    scores = np.asarray(decision_scores, dtype=float)
    pred = predict(scores)
    tp, fp, tn, fn = confusion(y, pred)
    precision, recall, f1 = _prf1(y, pred)
    is_anomaly = y == ANOMALY
    return EvalReport(
        precision=precision, recall=recall, f1=f1,
        average_precision=average_precision(is_anomaly, anomaly_scores(scores)),
        tp=tp, fp=fp, tn=tn, fn=fn,
        anomaly_ratio=float(is_anomaly.mean()),
        zero_division=tp + fp == 0 or tp + fn == 0,
    )