# preprocessing.py
"""
Standard scaling, covariance PCA and the per-method preprocessing pipelines.

Every transform is fitted on training rows only and then applied unchanged to
the test rows.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from errors import ConfigError, DegenerateDataError, DimensionError

logger = logging.getLogger(__name__)

STD_FLOOR = 1e-12
QUANTUM_SCALE = 0.1

# pipeline family per detector method
PIPELINE_FAMILY = {
    "rbf": "rbf",
    "fidelity_exact": "quantum",
    "inversion": "quantum",
    "swap": "quantum",
    "vs_average": "quantum",
    "vs_max": "quantum",
    "randomized": "randomized",
    "randomized_mitigated": "randomized",
    "vs_randomized_average": "randomized",
    "vs_randomized_max": "randomized",
}


def _check_matrix(X, n_features: Optional[int] = None) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if n_features is not None and X.shape[1] != n_features:
        raise DimensionError(f"expected {n_features} features, got {X.shape[1]}")
    return X


@dataclass
class ScalerModel:
    mean: np.ndarray
    std: np.ndarray
    keep: np.ndarray  # boolean mask over input features

    @classmethod
    def fit(cls, X) -> "ScalerModel":
        X = _check_matrix(X)
        mean = X.mean(axis=0)
        std = X.std(axis=0)
        keep = std >= STD_FLOOR
        if not np.any(keep):
            raise DegenerateDataError("every feature is constant on the training rows")
        if not np.all(keep):
            logger.warning("dropping zero-variance features %s", np.flatnonzero(~keep).tolist())
        return cls(mean=mean[keep], std=std[keep], keep=keep)

    def transform(self, X) -> np.ndarray:
        X = _check_matrix(X, self.keep.size)
        return (X[:, self.keep] - self.mean) / self.std

    def to_record(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist(), "keep": self.keep.tolist()}

    @classmethod
    def from_record(cls, record: dict) -> "ScalerModel":
        return cls(np.asarray(record["mean"], dtype=float), np.asarray(record["std"], dtype=float),
                   np.asarray(record["keep"], dtype=bool))


@dataclass
class PcaModel:
    """Top-M eigenvectors of the training covariance, largest eigenvalue first."""
    mean: np.ndarray
    components: np.ndarray  # (M, dim), orthonormal rows
    explained_variance: np.ndarray

    @classmethod
    def fit(cls, X, n_components: int) -> "PcaModel":
        X = _check_matrix(X)
        n, dim = X.shape
        if not 1 <= n_components <= dim:
            raise ConfigError(f"PCA needs 1 <= M <= {dim}, got M={n_components}")
        if n < 2:
            raise DegenerateDataError("PCA needs at least 2 training rows")
        mean = X.mean(axis=0)
        centered = X - mean
        cov = (centered.T @ centered) / (n - 1)
        eigvals, eigvecs = np.linalg.eigh(cov)
        order = np.argsort(eigvals)[::-1][:n_components]
        components = eigvecs[:, order].T
        # each component's largest-magnitude coordinate is positive
        pivots = np.argmax(np.abs(components), axis=1)
        signs = np.sign(components[np.arange(n_components), pivots])
        components *= np.where(signs == 0, 1.0, signs)[:, None]
        return cls(mean=mean, components=components, explained_variance=np.clip(eigvals[order], 0.0, None))

    @property
    def n_components(self) -> int:
        return self.components.shape[0]

    def transform(self, X) -> np.ndarray:
        X = _check_matrix(X, self.mean.size)
        return (X - self.mean) @ self.components.T

    def reconstruct(self, Z) -> np.ndarray:
        Z = _check_matrix(Z, self.n_components)
        return Z @ self.components + self.mean

    def to_record(self) -> dict:
        return {
            "mean": self.mean.tolist(),
            "components": self.components.tolist(),
            "explained_variance": self.explained_variance.tolist(),
        }

    @classmethod
    def from_record(cls, record: dict) -> "PcaModel":
        return cls(np.asarray(record["mean"], dtype=float), np.asarray(record["components"], dtype=float),
                   np.asarray(record["explained_variance"], dtype=float))


@dataclass
class FittedPipeline:
    """Ordered steps: ("scale", ScalerModel), ("pca", PcaModel) or ("multiply", factor)."""
    method: str
    steps: List[Tuple[str, object]] = field(default_factory=list)

    def transform(self, X) -> np.ndarray:
        out = _check_matrix(X)
        for kind, step in self.steps:
            out = out * step if kind == "multiply" else step.transform(out)
        return out

    def to_record(self) -> dict:
        steps = []
        for kind, step in self.steps:
            steps.append({"kind": kind, "factor": float(step)} if kind == "multiply"
                         else {"kind": kind, **step.to_record()})
        return {"method": self.method, "steps": steps}

    @classmethod
    def from_record(cls, record: dict) -> "FittedPipeline":
        steps = []
        for s in record.get("steps", []):
            if s["kind"] == "multiply":
                steps.append(("multiply", float(s["factor"])))
            elif s["kind"] == "scale":
                steps.append(("scale", ScalerModel.from_record(s)))
            elif s["kind"] == "pca":
                steps.append(("pca", PcaModel.from_record(s)))
            else:
                raise ConfigError(f"unknown pipeline step {s['kind']!r}")
        return cls(record["method"], steps)


def pipeline_family(method: str) -> str:
    try:
        return PIPELINE_FAMILY[method]
    except KeyError:
        raise ConfigError(f"unknown method {method!r}; expected one of {', '.join(PIPELINE_FAMILY)}") from None


def fit_pipeline(method: str, X_train, n_components: Optional[int] = None, synthetic: bool = False) -> FittedPipeline:
    """
    rbf:        scale, PCA(M)
    quantum:    scale, PCA(M), x0.1
    randomized: scale, PCA(M), scale, x1/sqrt(M)
    Synthetic data skips everything except the randomized family's scale and x1/sqrt(M).
    """
    family = pipeline_family(method)
    X = _check_matrix(X_train)
    fitted = FittedPipeline(method)

    def add(kind, step):
        nonlocal X
        fitted.steps.append((kind, step))
        X = X * step if kind == "multiply" else step.transform(X)

    if synthetic:
        if family == "randomized":
            add("scale", ScalerModel.fit(X))
            add("multiply", 1.0 / math.sqrt(X.shape[1]))
        return fitted

    if n_components is None:
        raise ConfigError(f"{method} pipeline needs the number of PCA components")
    add("scale", ScalerModel.fit(X))
    add("pca", PcaModel.fit(X, n_components))
    if family == "quantum":
        add("multiply", QUANTUM_SCALE)
    elif family == "randomized":
        add("scale", ScalerModel.fit(X))
        add("multiply", 1.0 / math.sqrt(n_components))
    return fitted


def pipeline(method: str, X_train, X_test, n_components: Optional[int] = None,
             synthetic: bool = False) -> Tuple[np.ndarray, np.ndarray, FittedPipeline]:
    fitted = fit_pipeline(method, X_train, n_components, synthetic)
    return fitted.transform(X_train), fitted.transform(X_test), fitted
