# report.py
"""
Summaries of a results file as CSV tables:

  performance_<dataset>_<sweep>.csv  mean/std of precision, recall, F1, AP
                                     per method and cell, with the random-detector AP
  timing_<dataset>_<sweep>.csv       mean/std of train/test seconds, counters,
                                     estimated hardware seconds
  cost_<dataset>_<sweep>.csv         measured kernel evaluations and shots against
                                     the cost model's expectation
  scaling_<dataset>.csv              log-log time exponents per method (size sweeps)
"""
import logging
from pathlib import Path
from typing import Iterable, List

import pandas as pd

from errors import DataError
from harness import RunResult, load_results, scaling_fit

logger = logging.getLogger(__name__)

PERFORMANCE_COLUMNS = ["precision", "recall", "f1", "average_precision"]
TIMING_COLUMNS = ["train_seconds", "test_seconds", "train_evaluations", "test_evaluations",
                  "train_shots", "test_shots", "hardware_seconds"]
EXPECTED_COLUMNS = ["expected_train_cost", "expected_test_cost", "expected_train_shots"]
COST_COLUMNS = ["train_cost", "expected_train_cost", "test_entries", "expected_test_cost",
                "train_shots", "expected_train_shots"]
MIN_SCALING_POINTS = 3


def results_frame(results: Iterable[RunResult]) -> pd.DataFrame:
    records = [r.to_record() for r in results]
    if not records:
        raise DataError("no results to report")
    df = pd.json_normalize(records)
    return df.rename(columns=lambda c: c.removeprefix("metrics."))


def _cell_column(sweep: str) -> str:
    return "n_features" if sweep == "features" else "n_train"


def _mean_std(df: pd.DataFrame, keys: List[str], columns: List[str]) -> pd.DataFrame:
    grouped = df.groupby(keys, sort=True)[columns].agg(["mean", "std"])
    grouped.columns = [f"{col}_{stat}" for col, stat in grouped.columns]
    grouped["n_seeds"] = df.groupby(keys, sort=True)["seed"].nunique()
    return grouped.reset_index()


def performance_table(df: pd.DataFrame, sweep: str) -> pd.DataFrame:
    keys = ["method", _cell_column(sweep)]
    table = _mean_std(df, keys, PERFORMANCE_COLUMNS)
    # an uninformative detector's AP equals the test anomaly ratio
    baseline = df.groupby(keys, sort=True)["anomaly_ratio"].mean().rename("random_ap").reset_index()
    return table.merge(baseline, on=keys)


def timing_table(df: pd.DataFrame, sweep: str) -> pd.DataFrame:
    return _mean_std(df, ["method", _cell_column(sweep)], TIMING_COLUMNS)


def cost_table(df: pd.DataFrame, sweep: str) -> pd.DataFrame:
    """Measured kernel cost per cell against the cost model's prediction."""
    df = df.copy()
    for col in EXPECTED_COLUMNS:
        df[col] = pd.to_numeric(df[col], errors="coerce") if col in df.columns else float("nan")
    # ensembles are costed by entries, full kernels by distinct evaluations
    df["train_cost"] = df["train_entries"].where(df["n_components"].notna(), df["train_evaluations"])
    keys = ["method", _cell_column(sweep)]
    table = df.groupby(keys, sort=True)[COST_COLUMNS].mean().reset_index()
    table["train_cost_ratio"] = table["train_cost"] / table["expected_train_cost"]
    table["test_cost_ratio"] = table["test_entries"] / table["expected_test_cost"]
    return table


def scaling_table(df: pd.DataFrame) -> pd.DataFrame:
    rows = []
    for method, sub in df.groupby("method", sort=True):
        means = sub.groupby("n_train", sort=True)[["train_seconds", "test_seconds"]].mean()
        if len(means) < MIN_SCALING_POINTS:
            logger.info("skipping scaling fit for %s: %d sizes", method, len(means))
            continue
        row = {"method": method, "n_sizes": len(means)}
        for phase in ("train_seconds", "test_seconds"):
            try:
                row[f"{phase}_exponent"] = scaling_fit(means.index.to_numpy(), means[phase].to_numpy())
            except DataError as exc:
                logger.warning("scaling fit for %s/%s failed: %s", method, phase, exc)
                row[f"{phase}_exponent"] = float("nan")
        rows.append(row)
    return pd.DataFrame(rows)


def build_report(results_path, out_dir) -> List[Path]:
    df = results_frame(load_results(results_path))
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for (dataset, sweep), sub in df.groupby(["dataset", "sweep"], sort=True):
        tables = (("performance", performance_table(sub, sweep)), ("timing", timing_table(sub, sweep)),
                  ("cost", cost_table(sub, sweep)))
        for name, table in tables:
            path = out_dir / f"{name}_{dataset}_{sweep}.csv"
            table.to_csv(path, index=False)
            written.append(path)
        if sweep == "size":
            scaling = scaling_table(sub)
            if not scaling.empty:
                path = out_dir / f"scaling_{dataset}.csv"
                scaling.to_csv(path, index=False)
                written.append(path)
    logger.info("wrote %d report tables to %s", len(written), out_dir)
    return written
