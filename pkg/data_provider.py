# data_provider.py
"""
Datasets and train/test splits: the synthetic two-blob set and the
credit-card fraud CSV.
Reads configuration from environment variables:
  - QAD_CREDITCARD_PATH  (local CSV; takes precedence over the download)
  - QAD_CREDITCARD_URL   (optional, download location for the CSV)
  - QAD_CACHE_DIR        (optional, default .qad_cache)

Run as a script for a quick check:
  python data_provider.py
"""
import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np
import pandas as pd
import requests
import yaml
from dotenv import load_dotenv

import seeding
from errors import ConfigError, IngestionError
from ocsvm import ANOMALY, NORMAL

load_dotenv()

logger = logging.getLogger(__name__)

# --- Config from environment variables ---
CREDITCARD_PATH = os.environ.get("QAD_CREDITCARD_PATH", "")
CREDITCARD_URL = os.environ.get("QAD_CREDITCARD_URL", "")
CACHE_DIR = os.environ.get("QAD_CACHE_DIR", ".qad_cache")

FEATURE_COLUMNS = [f"V{i}" for i in range(1, 29)]
CREDITCARD_COLUMNS = ["Time", *FEATURE_COLUMNS, "Amount", "Class"]
CREDITCARD_FULL_ROWS = 284807
CREDITCARD_FULL_ANOMALIES = 492

TEST_SIZE = 125
CREDITCARD_TEST_ANOMALIES = 6
SYNTHETIC_TEST_ANOMALIES = 37  # 0.3 * 125 = 37.5, rounded down
SYNTHETIC_CENTERS = np.array([[2.0, 2.0], [-2.0, -2.0]])
SYNTHETIC_STD = 0.3
SYNTHETIC_BOX = 4.0

PathLike = Union[str, Path]


@dataclass
class Dataset:
    features: np.ndarray
    labels: Optional[np.ndarray] = None  # +1 normal, -1 anomaly
    name: str = ""

    def __post_init__(self):
        self.features = np.atleast_2d(np.asarray(self.features, dtype=float))
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=int)
            if self.labels.shape != (self.features.shape[0],):
                raise IngestionError(f"{self.name}: {self.labels.shape[0]} labels for {self.features.shape[0]} rows")
        if not np.all(np.isfinite(self.features)):
            raise IngestionError(f"{self.name}: non-finite feature values")

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_anomalies(self) -> int:
        return 0 if self.labels is None else int(np.sum(self.labels == ANOMALY))


@dataclass
class Split:
    train: Dataset
    test: Dataset
    seed: int
    train_indices: Optional[np.ndarray] = None  # rows of the source dataset, when there is one
    test_indices: Optional[np.ndarray] = None
    source: str = ""


# --------------------------------------------------------------------
# Synthetic data
# --------------------------------------------------------------------
def _blob_points(rng: np.random.Generator, n: int) -> np.ndarray:
    first = n - n // 2
    counts = (first, n // 2)
    parts = [center + SYNTHETIC_STD * rng.standard_normal((k, 2)) for center, k in zip(SYNTHETIC_CENTERS, counts)]
    return np.vstack(parts)


def gen_synthetic(n_train: int, seed: int = 0) -> Split:
    """
    Two Gaussian blobs at (2, 2) and (-2, -2) as the normal class; the test
    batch adds points uniform on [-4, 4]^2 as anomalies.
    """
    if n_train < 4:
        raise ConfigError(f"synthetic training set needs at least 4 points, got {n_train}")
    rng = seeding.keyed_rng(seed, seeding.STREAM_SPLIT, 1)
    train = _blob_points(rng, n_train)
    n_normal_test = TEST_SIZE - SYNTHETIC_TEST_ANOMALIES
    normals = _blob_points(rng, n_normal_test)
    outliers = rng.uniform(-SYNTHETIC_BOX, SYNTHETIC_BOX, size=(SYNTHETIC_TEST_ANOMALIES, 2))
    test = np.vstack([normals, outliers])
    labels = np.concatenate([np.full(n_normal_test, NORMAL), np.full(SYNTHETIC_TEST_ANOMALIES, ANOMALY)])
    order = rng.permutation(TEST_SIZE)
    return Split(
        train=Dataset(train, np.full(n_train, NORMAL), "synthetic-train"),
        test=Dataset(test[order], labels[order], "synthetic-test"),
        seed=seed,
        source="synthetic",
    )


# --------------------------------------------------------------------
# Credit-card CSV
# --------------------------------------------------------------------
def load_creditcard(path: PathLike) -> Dataset:
    """Read the fraud CSV; V1..V28 become features, Class == 1 marks an anomaly."""
    path = Path(path)
    try:
        df = pd.read_csv(path)
    except FileNotFoundError as exc:
        raise IngestionError(f"credit-card file not found: {path}") from exc
    except pd.errors.EmptyDataError as exc:
        raise IngestionError(f"{path}: empty file") from exc

    missing = [c for c in CREDITCARD_COLUMNS if c not in df.columns]
    if missing:
        raise IngestionError(f"{path}: missing columns {', '.join(missing)}")
    if df.empty:
        raise IngestionError(f"{path}: header only, no rows")

    numeric = df[FEATURE_COLUMNS + ["Class"]].apply(pd.to_numeric, errors="coerce")
    bad = numeric.isna().any(axis=1)
    if bad.any():
        raise IngestionError(f"{path}: non-numeric or empty cells in {int(bad.sum())} rows (first at row {int(np.flatnonzero(bad)[0])})")
    features = numeric[FEATURE_COLUMNS].to_numpy(dtype=float)
    if not np.all(np.isfinite(features)):
        raise IngestionError(f"{path}: non-finite feature values")
    klass = numeric["Class"].to_numpy()
    if not np.all(np.isin(klass, (0, 1))):
        raise IngestionError(f"{path}: Class must be 0 or 1")

    labels = np.where(klass == 1, ANOMALY, NORMAL)
    data = Dataset(features, labels, "creditcard")
    if data.n_rows == CREDITCARD_FULL_ROWS and data.n_anomalies != CREDITCARD_FULL_ANOMALIES:
        raise IngestionError(
            f"{path}: full file should hold {CREDITCARD_FULL_ANOMALIES} anomalies, found {data.n_anomalies}"
        )
    logger.info("loaded %s: %d rows, %d anomalies", path, data.n_rows, data.n_anomalies)
    return data


def fetch_creditcard(url: Optional[str] = None, cache_dir: Optional[PathLike] = None,
                     force_refresh: bool = False) -> Path:
    """
    Download the CSV once and keep it in the cache directory.
    Raises IngestionError with a helpful message if no url is configured or the download fails.
    """
    url = url or CREDITCARD_URL
    cache_dir = Path(cache_dir or CACHE_DIR)
    target = cache_dir / "creditcard.csv"
    if target.exists() and not force_refresh:
        logger.debug("using cached credit-card file %s", target)
        return target
    if not url:
        raise IngestionError("No credit-card file. Set QAD_CREDITCARD_PATH or QAD_CREDITCARD_URL, or pass --data")

    cache_dir.mkdir(parents=True, exist_ok=True)
    partial = target.with_suffix(".part")
    logger.info("downloading credit-card data from %s", url)
    try:
        with requests.get(url, stream=True, timeout=60) as resp:
            resp.raise_for_status()
            with open(partial, "wb") as f:
                for chunk in resp.iter_content(chunk_size=1 << 20):
                    f.write(chunk)
    except requests.RequestException as exc:
        partial.unlink(missing_ok=True)
        raise IngestionError(f"credit-card download failed: {exc}") from exc
    partial.replace(target)
    return target


def resolve_creditcard_path(path: Optional[PathLike] = None) -> Path:
    """Explicit path, then QAD_CREDITCARD_PATH, then cache/download."""
    candidate = path or CREDITCARD_PATH
    if candidate:
        return Path(candidate)
    return fetch_creditcard()


# --------------------------------------------------------------------
# Splits
# --------------------------------------------------------------------
def make_split(data: Dataset, n_train: int, seed: int = 0, n_test: int = TEST_SIZE,
               n_test_anomalies: int = CREDITCARD_TEST_ANOMALIES) -> Split:
    """n_train normals for training; (n_test - n_test_anomalies) normals plus the anomalies for testing."""
    if data.labels is None:
        raise IngestionError(f"{data.name}: a split needs labelled data")
    if n_train < 1 or n_test_anomalies > n_test:
        raise ConfigError(f"bad split sizes: n_train={n_train}, n_test={n_test}, anomalies={n_test_anomalies}")
    normals = np.flatnonzero(data.labels == NORMAL)
    anomalies = np.flatnonzero(data.labels == ANOMALY)
    n_test_normal = n_test - n_test_anomalies
    if normals.size < n_train + n_test_normal:
        raise IngestionError(f"{data.name}: need {n_train + n_test_normal} normal rows, have {normals.size}")
    if anomalies.size < n_test_anomalies:
        raise IngestionError(f"{data.name}: need {n_test_anomalies} anomalies, have {anomalies.size}")

    rng = seeding.keyed_rng(seed, seeding.STREAM_SPLIT, 2)
    picked = rng.choice(normals, size=n_train + n_test_normal, replace=False)
    train_idx = picked[:n_train]
    test_idx = np.concatenate([picked[n_train:], rng.choice(anomalies, size=n_test_anomalies, replace=False)])
    test_idx = test_idx[rng.permutation(test_idx.size)]
    return split_from_indices(data, train_idx, test_idx, seed)


def split_from_indices(data: Dataset, train_idx, test_idx, seed: int) -> Split:
    train_idx = np.asarray(train_idx, dtype=int)
    test_idx = np.asarray(test_idx, dtype=int)
    return Split(
        train=Dataset(data.features[train_idx], data.labels[train_idx], f"{data.name}-train"),
        test=Dataset(data.features[test_idx], data.labels[test_idx], f"{data.name}-test"),
        seed=seed,
        train_indices=train_idx,
        test_indices=test_idx,
        source=data.name,
    )


def save_split_manifest(split: Split, path: PathLike) -> Path:
    if split.train_indices is None:
        raise ConfigError("only index-based splits have a manifest")
    manifest = {
        "source": split.source,
        "seed": int(split.seed),
        "train": [int(i) for i in split.train_indices],
        "test": [int(i) for i in split.test_indices],
    }
    path = Path(path)
    with open(path, "w", encoding="utf-8") as f:
        yaml.safe_dump(manifest, f, sort_keys=False)
    return path.resolve()


def load_split_manifest(path: PathLike, data: Dataset) -> Split:
    with open(path, "r", encoding="utf-8") as f:
        manifest = yaml.safe_load(f) or {}
    try:
        train_idx, test_idx = manifest["train"], manifest["test"]
    except KeyError as exc:
        raise IngestionError(f"{path}: manifest lacks {exc.args[0]!r}") from exc
    top = max(max(train_idx, default=-1), max(test_idx, default=-1))
    if top >= data.n_rows:
        raise IngestionError(f"{path}: index {top} outside a {data.n_rows}-row dataset")
    return split_from_indices(data, train_idx, test_idx, int(manifest.get("seed", 0)))


# --------------------------------------------------------------------
# debug main
# --------------------------------------------------------------------
if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(levelname)s: %(message)s")
    s = gen_synthetic(250, seed=0)
    print("synthetic train:", s.train.features.shape, "test:", s.test.features.shape,
          "test anomalies:", s.test.n_anomalies)
    if CREDITCARD_PATH:
        cc = load_creditcard(CREDITCARD_PATH)
        s = make_split(cc, 500, seed=0)
        print("creditcard train:", s.train.features.shape, "test anomalies:", s.test.n_anomalies)
