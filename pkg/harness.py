# harness.py
"""
Experiment sweeps: data-size and qubit-count sweeps over seeds, with
train/test wall-clock timing, kernel-evaluation and shot counters, and
estimated hardware time.

Configuration comes from a YAML file (validated against CONFIG_SCHEMA) with
defaults from environment variables:
  - QAD_SEEDS             (e.g. "0-14" or "0,3,7"; default 0-14)
  - QAD_RESULTS_PATH      (JSON-lines results file; default results/runs.jsonl)
  - QAD_HARDWARE_RATE_HZ  (measurement rate for hardware estimates; default 5000)
  - QAD_WORKERS           (parallel cells; default 1)

Each finished cell is appended to the results file at once, and a rerun skips
cells already recorded there.
"""
import functools
import hashlib
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import jsonschema
import numpy as np
import yaml
from dotenv import load_dotenv
from rich.progress import BarColumn, MofNCompleteColumn, Progress, TextColumn, TimeElapsedColumn

import data_provider
import ocsvm
import preprocessing
import seeding
import vs_ensemble
from errors import ConfigError, DataError, QadError
from kernels import KernelBackend, KernelMatrix, KernelMethod
from metrics import EvalReport, evaluate
from qsim import FeatureMapConfig

load_dotenv()

logger = logging.getLogger(__name__)

SECONDS_PER_YEAR = 365.25 * 24 * 3600

DEFAULT_SIZES = [250, 500, 750, 1000, 1250, 1500]
DEFAULT_FEATURE_COUNTS = [2, 3, 4, 5, 6, 7, 8]
FEATURE_SWEEP_SIZE = 500
SYNTHETIC_FEATURES = 2
CREDITCARD_FEATURES = 6


def parse_seeds(text: str) -> List[int]:
    """'0-14' or '0,3,7' or a mix such as '0-4,9'."""
    seeds = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        try:
            if "-" in part:
                lo, hi = part.split("-", 1)
                seeds.extend(range(int(lo), int(hi) + 1))
            else:
                seeds.append(int(part))
        except ValueError:
            raise ConfigError(f"cannot parse seed list {text!r}") from None
    if not seeds:
        raise ConfigError(f"empty seed list {text!r}")
    return seeds


# --- Config from environment variables ---
DEFAULT_SEEDS = os.environ.get("QAD_SEEDS", "0-14")
RESULTS_PATH = os.environ.get("QAD_RESULTS_PATH", "results/runs.jsonl")
HARDWARE_RATE_HZ = float(os.environ.get("QAD_HARDWARE_RATE_HZ", "5000"))
WORKERS = int(os.environ.get("QAD_WORKERS", "1"))

KERNEL_FOR_METHOD = {
    "rbf": KernelMethod.RBF,
    "fidelity_exact": KernelMethod.FIDELITY_EXACT,
    "inversion": KernelMethod.INVERSION,
    "swap": KernelMethod.SWAP,
    "randomized": KernelMethod.RANDOMIZED,
    "randomized_mitigated": KernelMethod.RANDOMIZED_MITIGATED,
    "vs_average": KernelMethod.INVERSION,
    "vs_max": KernelMethod.INVERSION,
    "vs_randomized_average": KernelMethod.RANDOMIZED,
    "vs_randomized_max": KernelMethod.RANDOMIZED,
}
VS_COMBINE = {
    "vs_average": vs_ensemble.Combine.AVERAGE,
    "vs_max": vs_ensemble.Combine.MAXIMUM,
    "vs_randomized_average": vs_ensemble.Combine.AVERAGE,
    "vs_randomized_max": vs_ensemble.Combine.MAXIMUM,
}
METHODS = list(KERNEL_FOR_METHOD)

_positive_int = {"type": "integer", "minimum": 1}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "dataset": {"enum": ["synthetic", "creditcard"]},
        "creditcard_path": {"type": ["string", "null"]},
        "method": {"enum": METHODS},
        "sweep": {"enum": ["size", "features"]},
        "data_sizes": {"type": "array", "items": {"type": "integer", "minimum": 4}, "minItems": 1},
        "feature_counts": {"type": "array", "items": _positive_int, "minItems": 1},
        "n_features": {"anyOf": [_positive_int, {"type": "null"}]},
        "seeds": {
            "anyOf": [
                {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1},
                {"type": "string"},
            ]
        },
        "nu": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "lambda": _positive_int,
        "shots": _positive_int,
        "r": {"type": "integer", "minimum": 2},
        "s": _positive_int,
        "n_min": _positive_int,
        "n_max": _positive_int,
        "n_components": {"anyOf": [_positive_int, {"type": "null"}]},
        "feature_map_reading": {"enum": ["figure", "equation"]},
        "inversion_circuit": {"enum": ["analytic", "full"]},
        "swap_circuit": {"enum": ["analytic", "full"]},
        "gamma": {"anyOf": [{"type": "number", "exclusiveMinimum": 0}, {"const": "scale"}]},
        "check_spectrum": {"type": "boolean"},
        "workers": _positive_int,
        "hardware_rate_hz": {"type": "number", "exclusiveMinimum": 0},
        "results_path": {"type": "string"},
    },
}


@dataclass
class ExperimentConfig:
    dataset: str = "synthetic"
    method: str = "inversion"
    creditcard_path: Optional[str] = None
    sweep: str = "size"
    data_sizes: List[int] = field(default_factory=lambda: list(DEFAULT_SIZES))
    feature_counts: List[int] = field(default_factory=lambda: list(DEFAULT_FEATURE_COUNTS))
    n_features: Optional[int] = None
    seeds: List[int] = field(default_factory=lambda: parse_seeds(DEFAULT_SEEDS))
    nu: float = 0.1
    lam: int = 3
    shots: int = 1000
    r: int = 30
    s: int = 9000
    n_min: int = vs_ensemble.DEFAULT_N_MIN
    n_max: int = vs_ensemble.DEFAULT_N_MAX
    n_components: Optional[int] = None
    feature_map_reading: str = "figure"
    inversion_circuit: str = "analytic"
    swap_circuit: str = "analytic"
    gamma: Union[str, float] = "scale"
    check_spectrum: bool = True
    workers: int = WORKERS
    hardware_rate_hz: float = HARDWARE_RATE_HZ
    results_path: str = RESULTS_PATH

    def __post_init__(self):
        if self.method not in KERNEL_FOR_METHOD:
            raise ConfigError(f"unknown method {self.method!r}")
        if self.dataset not in ("synthetic", "creditcard"):
            raise ConfigError(f"unknown dataset {self.dataset!r}")
        if self.n_min > self.n_max:
            raise ConfigError(f"n_min ({self.n_min}) exceeds n_max ({self.n_max})")
        if self.dataset == "synthetic":
            if self.sweep == "features":
                raise ConfigError("the qubit-count sweep needs the credit-card dataset")
            if self.n_features not in (None, SYNTHETIC_FEATURES):
                raise ConfigError(f"synthetic data has {SYNTHETIC_FEATURES} features, got n_features={self.n_features}")
        if self.is_vs:
            too_small = [n for n in self.train_sizes if n < self.n_max]
            if too_small:
                raise ConfigError(f"variable subsampling needs n >= n_max={self.n_max}, got sizes {too_small}")

    @property
    def is_vs(self) -> bool:
        return self.method in VS_COMBINE

    @property
    def kernel_method(self) -> KernelMethod:
        return KERNEL_FOR_METHOD[self.method]

    @property
    def train_sizes(self) -> List[int]:
        return list(self.data_sizes) if self.sweep == "size" else [self.data_sizes[0]]

    def default_features(self) -> int:
        if self.n_features is not None:
            return self.n_features
        return SYNTHETIC_FEATURES if self.dataset == "synthetic" else CREDITCARD_FEATURES

    def cells(self) -> List[Tuple[int, int, int]]:
        """(seed, n_train, n_features) for every cell, sweep value outermost."""
        if self.sweep == "features":
            grid = [(self.data_sizes[0], f) for f in self.feature_counts]
        else:
            grid = [(n, self.default_features()) for n in self.data_sizes]
        return [(seed, n, f) for n, f in grid for seed in self.seeds]

    def feature_map(self, n_features: int) -> FeatureMapConfig:
        return FeatureMapConfig.from_reading(self.feature_map_reading, n_features, self.lam)

    def backend(self, n_features: int) -> KernelBackend:
        method = self.kernel_method
        return KernelBackend(
            method=method,
            fmap=None if method == KernelMethod.RBF else self.feature_map(n_features),
            shots=self.shots, r=self.r, rm_shots=self.s, gamma=self.gamma,
            inversion_circuit=self.inversion_circuit, swap_circuit=self.swap_circuit,
        )

    def fingerprint(self) -> str:
        """Hash of the settings that change results; seeds and sizes are part of the cell key instead."""
        ignore = {"seeds", "data_sizes", "feature_counts", "workers", "results_path", "hardware_rate_hz"}
        settings = {k: v for k, v in self.to_mapping().items() if k not in ignore}
        return hashlib.sha1(json.dumps(settings, sort_keys=True).encode("utf-8")).hexdigest()[:12]

    def to_mapping(self) -> dict:
        out = asdict(self)
        out["lambda"] = out.pop("lam")
        return out

    @classmethod
    def from_mapping(cls, mapping: dict) -> "ExperimentConfig":
        try:
            jsonschema.validate(mapping, CONFIG_SCHEMA)
        except jsonschema.ValidationError as exc:
            where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ConfigError(f"invalid experiment config at {where}: {exc.message}") from None
        kwargs = dict(mapping)
        if "lambda" in kwargs:
            kwargs["lam"] = kwargs.pop("lambda")
        if isinstance(kwargs.get("seeds"), str):
            kwargs["seeds"] = parse_seeds(kwargs["seeds"])
        if kwargs.get("sweep") == "features" and "data_sizes" not in kwargs:
            kwargs["data_sizes"] = [FEATURE_SWEEP_SIZE]
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in kwargs.items() if k in known})


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as f:
            mapping = yaml.safe_load(f) or {}
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML ({exc})") from None
    if not isinstance(mapping, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return ExperimentConfig.from_mapping(mapping)


@dataclass
class RunResult:
    dataset: str
    method: str
    sweep: str
    n_train: int
    n_features: int
    seed: int
    n_test: int
    report: EvalReport
    train_seconds: float
    test_seconds: float
    train_entries: int
    train_evaluations: int
    test_entries: int
    test_evaluations: int
    train_shots: int
    test_shots: int
    hardware_seconds: float
    n_components: Optional[int] = None
    config_id: str = ""
    expected_train_cost: Optional[float] = None
    expected_test_cost: Optional[float] = None
    expected_train_shots: Optional[float] = None

    @property
    def key(self) -> tuple:
        return (self.config_id, self.dataset, self.method, self.n_train, self.n_features, self.seed)

    @property
    def total_shots(self) -> int:
        return self.train_shots + self.test_shots

    def to_record(self) -> dict:
        out = asdict(self)
        out["metrics"] = out.pop("report")
        return out

    @classmethod
    def from_record(cls, record: dict) -> "RunResult":
        data = dict(record)
        data["report"] = EvalReport(**data.pop("metrics"))
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in known})


# ---------------- cost model -------------------------------------------------

def estimate_hardware_seconds(total_shots: int, rate_hz: float = HARDWARE_RATE_HZ) -> float:
    if not rate_hz > 0:
        raise ConfigError(f"measurement rate must be positive, got {rate_hz}")
    return float(total_shots) / rate_hz


def seconds_to_years(seconds: float) -> float:
    return seconds / SECONDS_PER_YEAR


def full_kernel_evaluations(n: int) -> int:
    """Distinct entries of a symmetric n x n training kernel."""
    return n * (n + 1) // 2


def inversion_total_shots(n: int, shots: int) -> int:
    return full_kernel_evaluations(n) * shots


def randomized_total_shots(n: int, r: int, s: int) -> int:
    return n * r * s


def vs_expected_train_entries(c: int, n_min: int, n_max: int) -> float:
    return c * ((n_min + n_max) / 2.0) ** 2


def vs_expected_test_entries(c: int, n_min: int, n_max: int, n_test: int) -> float:
    return c * (n_min + n_max) / 2.0 * n_test


def expected_costs(config: ExperimentConfig, n_train: int, n_test: int) -> Dict[str, Optional[float]]:
    """
    What the cost model predicts for one cell, recorded next to the tallies.

    Train cost is kernel evaluations for a full kernel and summed component
    entries for an ensemble. Shots are predicted for full kernels only; VS
    component sizes are random.
    """
    method = config.kernel_method
    if config.is_vs:
        c = config.n_components or vs_ensemble.component_count(n_train)
        return {
            "expected_train_cost": vs_expected_train_entries(c, config.n_min, config.n_max),
            "expected_test_cost": vs_expected_test_entries(c, config.n_min, config.n_max, n_test),
            "expected_train_shots": None,
        }
    if method in (KernelMethod.INVERSION, KernelMethod.SWAP):
        shots = inversion_total_shots(n_train, config.shots)
    elif method in (KernelMethod.RANDOMIZED, KernelMethod.RANDOMIZED_MITIGATED):
        shots = randomized_total_shots(n_train, config.r, config.s)
    else:
        shots = 0
    return {
        "expected_train_cost": float(full_kernel_evaluations(n_train)),
        "expected_test_cost": float(n_train * n_test),
        "expected_train_shots": float(shots),
    }


def scaling_fit(sizes: Sequence[float], seconds: Sequence[float]) -> float:
    """Least-squares slope of log(seconds) against log(size)."""
    x = np.asarray(sizes, dtype=float)
    y = np.asarray(seconds, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise DataError(f"sizes {x.shape} and seconds {y.shape} must be matching vectors")
    if x.size < 3:
        raise DataError(f"scaling fit needs at least 3 points, got {x.size}")
    if np.any(x <= 0) or np.any(y <= 0):
        raise DataError("scaling fit needs positive sizes and times")
    slope, _ = np.polyfit(np.log(x), np.log(y), 1)
    return float(slope)


# ---------------- one cell ---------------------------------------------------

@dataclass
class KernelTally:
    """Wraps a backend and counts what its kernel calls cost."""
    backend: KernelBackend
    entries: int = 0
    evaluations: int = 0
    shots: int = 0

    def _count(self, K: KernelMatrix) -> KernelMatrix:
        self.entries += int(K.meta.get("entries", K.values.size))
        self.evaluations += int(K.meta.get("evaluations", K.values.size))
        self.shots += int(K.meta.get("total_shots", 0))
        return K

    def train(self, X, seed: int) -> KernelMatrix:
        return self._count(self.backend.train(X, seed))

    def cross(self, X_test, X_train, context, seed: int) -> KernelMatrix:
        return self._count(self.backend.cross(X_test, X_train, context, seed))


@functools.lru_cache(maxsize=2)
def _creditcard(path: Optional[str]) -> data_provider.Dataset:
    return data_provider.load_creditcard(data_provider.resolve_creditcard_path(path))


def build_split(config: ExperimentConfig, n_train: int, seed: int) -> data_provider.Split:
    if config.dataset == "synthetic":
        return data_provider.gen_synthetic(n_train, seed)
    return data_provider.make_split(_creditcard(config.creditcard_path), n_train, seed)


def run_cell(config: ExperimentConfig, seed: int, n_train: int, n_features: int) -> RunResult:
    split = build_split(config, n_train, seed)
    X_train, X_test, _ = preprocessing.pipeline(
        config.method, split.train.features, split.test.features,
        n_components=n_features, synthetic=config.dataset == "synthetic",
    )
    backend = config.backend(X_train.shape[1])
    train_seed = seeding.derive_seed(seed, 1)
    test_seed = seeding.derive_seed(seed, 2)
    train_tally, test_tally = KernelTally(backend), KernelTally(backend)
    n_components = None

    start = time.perf_counter()
    if config.is_vs:
        plan = vs_ensemble.plan(n_train, config.n_min, config.n_max, seed=train_seed, n_components=config.n_components)
        model = vs_ensemble.fit(plan, X_train, train_tally.train, config.nu, seed=train_seed,
                                combine=VS_COMBINE[config.method], check_spectrum=config.check_spectrum)
        n_components = plan.c
    else:
        K = train_tally.train(X_train, train_seed)
        model = ocsvm.solve_dual(K, config.nu, check_spectrum=config.check_spectrum)
        model.train_ref = X_train
        context = K.context
    train_seconds = time.perf_counter() - start

    start = time.perf_counter()
    if config.is_vs:
        scores = vs_ensemble.score(model, X_test, test_tally.cross, seed=test_seed)
    else:
        scores = ocsvm.decision_scores(model, test_tally.cross(X_test, X_train, context, test_seed))
    test_seconds = time.perf_counter() - start

    report = evaluate(split.test.labels, scores)
    total_shots = train_tally.shots + test_tally.shots
    logger.debug("cell seed=%d n=%d d=%d: AP=%.3f F1=%.3f train=%.2fs test=%.2fs",
                 seed, n_train, n_features, report.average_precision, report.f1, train_seconds, test_seconds)
    return RunResult(
        dataset=config.dataset, method=config.method, sweep=config.sweep,
        n_train=n_train, n_features=n_features, seed=seed, n_test=split.test.n_rows,
        report=report, train_seconds=train_seconds, test_seconds=test_seconds,
        train_entries=train_tally.entries, train_evaluations=train_tally.evaluations,
        test_entries=test_tally.entries, test_evaluations=test_tally.evaluations,
        train_shots=train_tally.shots, test_shots=test_tally.shots,
        hardware_seconds=estimate_hardware_seconds(total_shots, config.hardware_rate_hz),
        n_components=n_components, config_id=config.fingerprint(),
        **expected_costs(config, n_train, split.test.n_rows),
    )


def _run_cell_noted(config: ExperimentConfig, seed: int, n_train: int, n_features: int) -> RunResult:
    try:
        return run_cell(config, seed, n_train, n_features)
    except QadError as exc:
        exc.add_note(f"cell: method={config.method} dataset={config.dataset} seed={seed} n={n_train} features={n_features}")
        raise


# ---------------- results file -----------------------------------------------

def load_results(path) -> List[RunResult]:
    path = Path(path)
    if not path.exists():
        return []
    out = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(RunResult.from_record(json.loads(line)))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                logger.warning("%s:%d: skipping unreadable record (%s)", path, lineno, exc)
    return out


def append_result(path, result: RunResult):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "a", encoding="utf-8") as f:
        f.write(json.dumps(result.to_record(), sort_keys=True) + "\n")


# ---------------- sweeps -----------------------------------------------------

def run_experiment(config: ExperimentConfig, results_path=None, resume: bool = True,
                   show_progress: bool = False) -> List[RunResult]:
    """
    Run every (seed, cell) of the config; results come back in cell order.
    Cells already in the results file (same config fingerprint) are reused.
    """
    results_path = Path(results_path or config.results_path)
    config_id = config.fingerprint()
    cells = config.cells()
    done: Dict[tuple, RunResult] = {}
    if resume:
        for r in load_results(results_path):
            if r.config_id == config_id:
                done[r.key] = r

    def key_of(cell):
        seed, n, f = cell
        return (config_id, config.dataset, config.method, n, f, seed)

    todo = [c for c in cells if key_of(c) not in done]
    if len(todo) < len(cells):
        logger.info("resuming: %d of %d cells already in %s", len(cells) - len(todo), len(cells), results_path)

    progress = Progress(TextColumn("[bold]{task.description}"), BarColumn(), MofNCompleteColumn(),
                        TimeElapsedColumn(), disable=not show_progress)
    with progress:
        task = progress.add_task(f"{config.method} on {config.dataset}", total=len(todo))
        if config.workers > 1 and len(todo) > 1:
            with ProcessPoolExecutor(max_workers=config.workers) as pool:
                futures = [pool.submit(_run_cell_noted, config, *cell) for cell in todo]
                try:
                    for fut in as_completed(futures):
                        result = fut.result()
                        append_result(results_path, result)
                        done[result.key] = result
                        progress.advance(task)
                except BaseException:
                    for fut in futures:
                        fut.cancel()
                    raise
        else:
            for cell in todo:
                result = _run_cell_noted(config, *cell)
                append_result(results_path, result)
                done[result.key] = result
                progress.advance(task)

    return [done[key_of(c)] for c in cells]
