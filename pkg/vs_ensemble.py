# vs_ensemble.py
"""
Variable-subsampling ensemble of one-class SVMs.

Each component trains on a random subset (without replacement) whose size is
drawn uniformly from [n_min, n_max]. Component decision scores are
z-normalized over the scored batch and combined by mean or max.
"""
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, List, Optional

import numpy as np

import ocsvm
import seeding
from errors import NormalizationError, PlanningError, QadError
from kernels import KernelContext, KernelMatrix
from ocsvm import OcSvmModel

logger = logging.getLogger(__name__)

DEFAULT_N_MIN = 50
DEFAULT_N_MAX = 100
COMPONENT_DIVISOR = 100
STD_FLOOR = 1e-12

# train_fn(X, seed) -> KernelMatrix ; cross_fn(X_test, X_train, context, seed) -> KernelMatrix
TrainKernelFn = Callable[[np.ndarray, int], KernelMatrix]
CrossKernelFn = Callable[[np.ndarray, np.ndarray, KernelContext, int], KernelMatrix]


class Combine(str, Enum):
    AVERAGE = "average"
    MAXIMUM = "maximum"


@dataclass
class VsPlan:
    n: int
    c: int
    sizes: List[int]
    n_min: int
    n_max: int
    subsets: List[np.ndarray]
    seed: int = 0


@dataclass
class VsComponent:
    model: OcSvmModel
    subset: np.ndarray
    kernel_method: str
    context: KernelContext = field(default_factory=KernelContext)
    train_entries: int = 0
    train_evaluations: int = 0
    train_shots: int = 0


@dataclass
class VsEnsemble:
    components: List[VsComponent]
    combine: Combine
    nu: float
    plan: Optional[VsPlan] = None

    @property
    def train_entries(self) -> int:
        return sum(c.train_entries for c in self.components)

    @property
    def train_evaluations(self) -> int:
        return sum(c.train_evaluations for c in self.components)

    @property
    def train_shots(self) -> int:
        return sum(c.train_shots for c in self.components)


def component_count(n: int, divisor: int = COMPONENT_DIVISOR) -> int:
    return max(1, n // divisor)


def plan(n: int, n_min: int = DEFAULT_N_MIN, n_max: int = DEFAULT_N_MAX, seed: int = 0,
         n_components: Optional[int] = None) -> VsPlan:
    if not n_min >= 1:
        raise PlanningError(f"n_min must be >= 1, got {n_min}")
    if n_max < n_min:
        raise PlanningError(f"n_max ({n_max}) below n_min ({n_min})")
    if n < n_max:
        raise PlanningError(f"training size {n} is smaller than n_max={n_max}")
    c = component_count(n) if n_components is None else int(n_components)
    if c < 1:
        raise PlanningError(f"component count must be >= 1, got {c}")
    rng = seeding.keyed_rng(seed, seeding.STREAM_VS_PLAN)
    sizes = [int(s) for s in rng.integers(n_min, n_max + 1, size=c)]
    subsets = [
        np.sort(seeding.keyed_rng(seed, seeding.STREAM_VS_COMPONENT, k).choice(n, size=size, replace=False))
        for k, size in enumerate(sizes)
    ]
    return VsPlan(n=n, c=c, sizes=sizes, n_min=n_min, n_max=n_max, subsets=subsets, seed=seed)


def fit(vs_plan: VsPlan, X_train, kernel_fn: TrainKernelFn, nu: float, seed: int = 0,
        combine: Combine = Combine.AVERAGE, check_spectrum: bool = True) -> VsEnsemble:
    X_train = np.asarray(X_train, dtype=float)
    if X_train.shape[0] != vs_plan.n:
        raise PlanningError(f"plan built for {vs_plan.n} points, got {X_train.shape[0]} training rows")
    components = []
    for k, subset in enumerate(vs_plan.subsets):
        X_sub = X_train[subset]
        try:
            K = kernel_fn(X_sub, seeding.derive_seed(seed, seeding.STREAM_VS_COMPONENT, k, 0))
            model = ocsvm.solve_dual(K, nu, check_spectrum=check_spectrum)
        except QadError as exc:
            exc.add_note(f"variable-subsampling component {k} (size {subset.size})")
            raise
        model.train_ref = X_sub
        components.append(VsComponent(
            model=model, subset=subset, kernel_method=K.method.value, context=K.context,
            train_entries=int(K.meta.get("entries", K.values.size)),
            train_evaluations=int(K.meta.get("evaluations", K.values.size)),
            train_shots=int(K.meta.get("total_shots", 0)),
        ))
    logger.info("trained %d components, sizes %s", len(components), vs_plan.sizes)
    return VsEnsemble(components=components, combine=Combine(combine), nu=nu, plan=vs_plan)


def z_normalize(scores: np.ndarray) -> np.ndarray:
    """Batch z-score; a flat component (std below 1e-12) abstains with zeros."""
    std = scores.std()
    if std < STD_FLOOR:
        return np.zeros_like(scores)
    return (scores - scores.mean()) / std


def component_scores(ensemble: VsEnsemble, X_test, kernel_fn: CrossKernelFn, seed: int = 0) -> np.ndarray:
    """Normalized per-component scores, shape (c, n_test)."""
    X_test = np.atleast_2d(np.asarray(X_test, dtype=float))
    if X_test.shape[0] < 2:
        raise NormalizationError("z-normalizing component scores needs at least 2 test points")
    rows = []
    for k, comp in enumerate(ensemble.components):
        try:
            K = kernel_fn(X_test, comp.model.train_ref, comp.context,
                          seeding.derive_seed(seed, seeding.STREAM_VS_COMPONENT, k, 1))
        except QadError as exc:
            exc.add_note(f"variable-subsampling component {k}")
            raise
        rows.append(z_normalize(ocsvm.decision_scores(comp.model, K)))
    return np.vstack(rows)


def score(ensemble: VsEnsemble, X_test, kernel_fn: CrossKernelFn, seed: int = 0) -> np.ndarray:
    normalized = component_scores(ensemble, X_test, kernel_fn, seed)
    if ensemble.combine == Combine.MAXIMUM:
        return normalized.max(axis=0)
    return normalized.mean(axis=0)


def predict(scores) -> np.ndarray:
    return ocsvm.predict(scores)


def prediction_entries(ensemble: VsEnsemble, n_test: int) -> int:
    return sum(int(c.subset.size) for c in ensemble.components) * n_test


def restore_contexts(ensemble: VsEnsemble, context_fn: Callable[[np.ndarray, int], KernelContext],
                     seed: int = 0) -> VsEnsemble:
    """Recreate per-component kernel contexts after loading, using the seeds `fit` used."""
    for k, comp in enumerate(ensemble.components):
        comp.context = context_fn(comp.model.train_ref, seeding.derive_seed(seed, seeding.STREAM_VS_COMPONENT, k, 0))
    return ensemble


def ensemble_to_record(ensemble: VsEnsemble) -> dict:
    record = {
        "combine": ensemble.combine.value,
        "nu": float(ensemble.nu),
        "components": [
            {
                "subset": [int(i) for i in comp.subset],
                "kernel_method": comp.kernel_method,
                "gamma": comp.context.gamma,
                "model": ocsvm.model_to_record(comp.model),
            }
            for comp in ensemble.components
        ],
    }
    if ensemble.plan is not None:
        p = ensemble.plan
        record["plan"] = {"n": p.n, "c": p.c, "sizes": list(p.sizes), "n_min": p.n_min, "n_max": p.n_max, "seed": p.seed}
    return record


def ensemble_from_record(record: dict) -> VsEnsemble:
    components = [
        VsComponent(
            model=ocsvm.model_from_record(c["model"]),
            subset=np.asarray(c["subset"], dtype=int),
            kernel_method=c["kernel_method"],
            context=KernelContext(gamma=c.get("gamma")),
        )
        for c in record["components"]
    ]
    vs_plan = None
    if "plan" in record:
        p = record["plan"]
        vs_plan = VsPlan(n=p["n"], c=p["c"], sizes=list(p["sizes"]), n_min=p["n_min"], n_max=p["n_max"],
                         subsets=[comp.subset for comp in components], seed=p.get("seed", 0))
    return VsEnsemble(components=components, combine=Combine(record["combine"]), nu=float(record["nu"]), plan=vs_plan)
