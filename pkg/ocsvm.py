# ocsvm.py
"""
One-class SVM on a precomputed kernel.

Dual:  min_a  1/2 a^T G a   s.t.  0 <= a_i <= 1/(nu N),  sum(a) = 1

solved by pairwise (SMO) updates on the maximal-violating pair. Scores are
(G_cross a)_j - rho; negative means anomalous.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from errors import ConfigError, DimensionError, SolverError
from kernels import KernelMatrix

logger = logging.getLogger(__name__)

NORMAL = 1
ANOMALY = -1

KKT_TOL = 1e-6
MAX_ITER = 10 ** 6
MARGIN_SLACK = 1e-8
SUPPORT_TOL = 1e-12
TAU = 1e-12
INDEFINITE_TOL = -1e-6


@dataclass
class OcSvmModel:
    alphas: np.ndarray
    rho: float
    nu: float
    support_indices: np.ndarray
    train_ref: Optional[np.ndarray] = None  # training rows, needed for prediction kernels
    kernel_meta: dict = field(default_factory=dict)
    objective: float = float("nan")
    n_iter: int = 0
    indefinite: bool = False

    @property
    def n_train(self) -> int:
        return self.alphas.shape[0]

    @property
    def upper_bound(self) -> float:
        return 1.0 / (self.nu * self.n_train)


def _initial_alphas(n: int, nu: float) -> np.ndarray:
    # first floor(nu N) coordinates at the box bound, remainder on the next one
    c = 1.0 / (nu * n)
    k = min(n, int(math.floor(nu * n)))
    alpha = np.zeros(n)
    alpha[:k] = c
    if k < n:
        alpha[k] = max(0.0, 1.0 - k * c)
    return alpha / alpha.sum()


def solve_dual(G: KernelMatrix, nu: float, tol: float = KKT_TOL, max_iter: int = MAX_ITER,
               check_spectrum: bool = True) -> OcSvmModel:
    Q = np.asarray(G.values, dtype=float)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
        raise DimensionError(f"training kernel must be square, got shape {Q.shape}")
    if not 0.0 < nu <= 1.0:
        raise ConfigError(f"nu must lie in (0, 1], got {nu}")
    if not np.all(np.isfinite(Q)):
        raise SolverError("training kernel contains non-finite entries")

    n = Q.shape[0]
    c = 1.0 / (nu * n)
    indefinite = False
    if check_spectrum and n > 1:
        min_eig = G.min_eigenvalue()
        if min_eig < INDEFINITE_TOL:
            indefinite = True
            logger.warning("training kernel is indefinite (min eigenvalue %.3g); solving anyway", min_eig)

    alpha = _initial_alphas(n, nu)
    grad = Q @ alpha
    diag = np.diag(Q)
    n_iter = 0
    while n_iter < max_iter:
        up = alpha < c
        low = alpha > 0.0
        g_up = np.where(up, grad, np.inf)
        g_low = np.where(low, grad, -np.inf)
        i = int(np.argmin(g_up))
        j = int(np.argmax(g_low))
        if g_low[j] - g_up[i] < tol or i == j:
            break
        quad = diag[i] + diag[j] - 2.0 * Q[i, j]
        if quad <= 0.0:
            quad = TAU
        delta = (grad[j] - grad[i]) / quad
        delta = min(delta, c - alpha[i], alpha[j])
        alpha[i] += delta
        alpha[j] -= delta
        grad += delta * (Q[:, i] - Q[:, j])
        n_iter += 1
    else:
        logger.warning("SMO stopped at max_iter=%d before reaching tolerance %.1e", max_iter, tol)

    np.clip(alpha, 0.0, c, out=alpha)
    # fresh gradient, so training scores reproduce it bit for bit
    grad = Q @ alpha
    rho = _offset(alpha, grad, c, tol)
    support = np.flatnonzero(alpha > SUPPORT_TOL)
    objective = 0.5 * float(alpha @ Q @ alpha)
    logger.debug("solve_dual: N=%d nu=%.3f iterations=%d support=%d rho=%.6g", n, nu, n_iter, support.size, rho)
    return OcSvmModel(
        alphas=alpha, rho=rho, nu=nu, support_indices=support,
        kernel_meta={"method": G.method.value, **G.meta},
        objective=objective, n_iter=n_iter, indefinite=indefinite,
    )


def _offset(alpha: np.ndarray, grad: np.ndarray, c: float, tol: float = KKT_TOL) -> float:
    """
    rho such that no margin or zero-weight point scores below 0.

    Only points at the upper bound can then be training outliers, and there
    are at most nu N of them.
    """
    margin = (alpha > MARGIN_SLACK) & (alpha < c - MARGIN_SLACK)
    at_zero = alpha <= MARGIN_SLACK
    hi = grad[at_zero].min() if np.any(at_zero) else np.inf
    if np.any(margin):
        return float(min(np.median(grad[margin]) - tol, grad[margin].min(), hi))
    at_bound = alpha >= c - MARGIN_SLACK
    lo = grad[at_bound].max() if np.any(at_bound) else None
    if lo is None:
        return float(hi)
    if not np.isfinite(hi):
        return float(lo)
    return float(min(0.5 * (lo + hi), hi))


def decision_scores(model: OcSvmModel, K_cross: KernelMatrix, include_offset: bool = True) -> np.ndarray:
    """Sum_i alpha_i K(x_j, x_i), minus rho unless include_offset is False."""
    values = np.atleast_2d(K_cross.values)
    if values.shape[1] != model.n_train:
        raise DimensionError(f"cross kernel has {values.shape[1]} columns, model has {model.n_train} training points")
    scores = values @ model.alphas
    return scores - model.rho if include_offset else scores


def predict(scores) -> np.ndarray:
    """+1 normal, -1 anomalous; a score of exactly 0 is normal."""
    scores = np.asarray(scores, dtype=float)
    return np.where(scores < 0.0, ANOMALY, NORMAL)


def model_to_record(model: OcSvmModel, include_train: bool = True) -> dict:
    record = {
        "nu": float(model.nu),
        "rho": float(model.rho),
        "alphas": [float(a) for a in model.alphas],
        "support_indices": [int(i) for i in model.support_indices],
        "objective": float(model.objective),
        "n_iter": int(model.n_iter),
        "indefinite": bool(model.indefinite),
        "kernel": _plain(model.kernel_meta),
    }
    if include_train and model.train_ref is not None:
        record["train_features"] = np.asarray(model.train_ref, dtype=float).tolist()
    return record


def model_from_record(record: dict) -> OcSvmModel:
    train = record.get("train_features")
    return OcSvmModel(
        alphas=np.asarray(record["alphas"], dtype=float),
        rho=float(record["rho"]),
        nu=float(record["nu"]),
        support_indices=np.asarray(record["support_indices"], dtype=int),
        train_ref=None if train is None else np.asarray(train, dtype=float),
        kernel_meta=dict(record.get("kernel", {})),
        objective=float(record.get("objective", float("nan"))),
        n_iter=int(record.get("n_iter", 0)),
        indefinite=bool(record.get("indefinite", False)),
    )


def _plain(value):
    """numpy scalars and arrays to plain Python, recursively."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    return value
