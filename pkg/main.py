"""
Orchestrator: data splits, kernel matrices, model training and prediction,
experiment sweeps and their CSV reports.
Use: python main.py experiment --config configs/synthetic_inversion.yaml
     python main.py train --method vs_average --size 500 --seed 3 --out model.yaml
Exit codes: 0 ok, 2 config error, 3 data error, 4 numerical error.
"""

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np
import pandas as pd
import yaml
from dotenv import load_dotenv
from rich.logging import RichHandler

import data_provider
import harness
import kernel_store
import ocsvm
import preprocessing
import report
import seeding
import vs_ensemble
from errors import IngestionError, QadError
from kernels import KernelBackend
from metrics import evaluate

load_dotenv()

log = logging.getLogger("main")

LOG_LEVEL = os.environ.get("QAD_LOG_LEVEL", "INFO")
LOG_FORMAT = "%(asctime)s %(levelname)s: %(message)s"


def setup_logging(verbose: bool = False, log_file: str = None):
    level = logging.DEBUG if verbose else getattr(logging, LOG_LEVEL.upper(), logging.INFO)
    handlers = [RichHandler(show_path=False, rich_tracebacks=False)]
    if log_file:
        file_handler = logging.FileHandler(log_file)
        file_handler.setFormatter(logging.Formatter(LOG_FORMAT))
        handlers.append(file_handler)
    logging.basicConfig(level=level, format="%(message)s", datefmt="[%X]", handlers=handlers, force=True)


# --------------------------------------------------------------------
# shared argument groups
# --------------------------------------------------------------------
def _add_data_args(p: argparse.ArgumentParser):
    p.add_argument("--dataset", choices=["synthetic", "creditcard"], default="synthetic")
    p.add_argument("--data", type=str, default=None, help="credit-card CSV (else QAD_CREDITCARD_PATH / download)")
    p.add_argument("--size", type=int, default=500, help="training size")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--features", type=int, default=None, help="PCA components / qubits (default 2 synthetic, 6 creditcard)")


def _add_model_args(p: argparse.ArgumentParser):
    p.add_argument("--method", choices=harness.METHODS, default="inversion")
    p.add_argument("--shots", type=int, default=1000)
    p.add_argument("--settings", type=int, default=30, help="randomized-measurement settings r")
    p.add_argument("--rm-shots", type=int, default=9000, help="shots per randomized-measurement setting")
    p.add_argument("--nu", type=float, default=0.1)
    p.add_argument("--lambda", dest="lam", type=int, default=3, help="feature-map reuploadings")
    p.add_argument("--reading", choices=["figure", "equation"], default="figure")


def _config_from_args(args) -> harness.ExperimentConfig:
    return harness.ExperimentConfig(
        dataset=args.dataset, method=args.method, creditcard_path=args.data,
        data_sizes=[args.size], n_features=args.features, seeds=[args.seed],
        nu=args.nu, lam=args.lam, shots=args.shots, r=args.settings, s=args.rm_shots,
        feature_map_reading=args.reading,
    )


def _prepare(config: harness.ExperimentConfig, seed: int):
    n_train = config.data_sizes[0]
    split = harness.build_split(config, n_train, seed)
    X_train, X_test, fitted = preprocessing.pipeline(
        config.method, split.train.features, split.test.features,
        n_components=config.default_features(), synthetic=config.dataset == "synthetic",
    )
    return split, X_train, X_test, fitted


# --------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------
def cmd_gen_data(args) -> int:
    config = harness.ExperimentConfig(dataset=args.dataset, method="rbf", creditcard_path=args.data,
                                      data_sizes=[args.size], seeds=[args.seed])
    split = harness.build_split(config, args.size, args.seed)
    out = Path(args.out or f"data_{args.dataset}_{args.size}_{args.seed}")
    out.mkdir(parents=True, exist_ok=True)
    for name, ds in (("train", split.train), ("test", split.test)):
        frame = pd.DataFrame(ds.features, columns=[f"x{i}" for i in range(ds.features.shape[1])])
        frame["label"] = ds.labels
        frame.to_csv(out / f"{name}.csv", index=False)
    if split.train_indices is not None:
        data_provider.save_split_manifest(split, out / "split.yaml")
    log.info("wrote split to %s: %d train, %d test (%d anomalies)",
             out, split.train.n_rows, split.test.n_rows, split.test.n_anomalies)
    return 0


def cmd_kernel(args) -> int:
    config = _config_from_args(args)
    _, X_train, _, _ = _prepare(config, args.seed)
    K = config.backend(X_train.shape[1]).train(X_train, seeding.derive_seed(args.seed, 1))
    out = Path(args.out or f"kernel_{config.method}_{args.size}_{args.seed}.qkm")
    kernel_store.save_kernel(K, out)
    if args.csv:
        kernel_store.export_csv(K, out.with_suffix(".csv"))
    log.info("%s kernel %dx%d, %d evaluations, %d shots",
             K.method.value, *K.shape, K.meta.get("evaluations", 0), K.meta.get("total_shots", 0))
    return 0


def cmd_train(args) -> int:
    config = _config_from_args(args)
    split, X_train, _, fitted = _prepare(config, args.seed)
    backend = config.backend(X_train.shape[1])
    train_seed = seeding.derive_seed(args.seed, 1)
    record = {
        "data": {"dataset": config.dataset, "path": config.creditcard_path, "size": config.data_sizes[0],
                 "seed": args.seed, "features": config.default_features()},
        "method": config.method,
        "train_seed": train_seed,
        "backend": backend.to_record(),
        "pipeline": fitted.to_record(),
    }
    if config.is_vs:
        plan = vs_ensemble.plan(X_train.shape[0], config.n_min, config.n_max, seed=train_seed)
        ensemble = vs_ensemble.fit(plan, X_train, backend.train, config.nu, seed=train_seed,
                                   combine=harness.VS_COMBINE[config.method])
        record["ensemble"] = vs_ensemble.ensemble_to_record(ensemble)
        log.info("trained %d-component ensemble", plan.c)
    else:
        K = backend.train(X_train, train_seed)
        model = ocsvm.solve_dual(K, config.nu)
        model.train_ref = X_train
        record["model"] = ocsvm.model_to_record(model)
        log.info("trained OC-SVM: %d support vectors, rho=%.6g", model.support_indices.size, model.rho)
    out = Path(args.out or f"model_{config.method}_{args.size}_{args.seed}.yaml")
    with open(out, "w", encoding="utf-8") as f:
        yaml.safe_dump(record, f, sort_keys=False)
    log.info("saved model to %s", out)
    return 0


MODEL_KEYS = ("data", "method", "train_seed", "backend", "pipeline")
DATA_KEYS = ("dataset", "size", "seed", "features")


def _load_model(path):
    """Model file from `train`; anything unreadable or incomplete is an IngestionError."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            record = yaml.safe_load(f)
    except FileNotFoundError:
        raise IngestionError(f"model file not found: {path}") from None
    except yaml.YAMLError as exc:
        raise IngestionError(f"{path}: not a YAML model file") from exc
    if not isinstance(record, dict):
        raise IngestionError(f"{path}: model file must hold a mapping")
    missing = [k for k in MODEL_KEYS if k not in record]
    if "model" not in record and "ensemble" not in record:
        missing.append("model")
    if missing:
        raise IngestionError(f"{path}: model file lacks {', '.join(missing)}")
    try:
        fitted = preprocessing.FittedPipeline.from_record(record["pipeline"])
        backend = KernelBackend.from_record(record["backend"])
        train_seed = int(record["train_seed"])
        missing = [k for k in DATA_KEYS if k not in record["data"]]
        if missing:
            raise IngestionError(f"{path}: data section lacks {', '.join(missing)}")
        if "ensemble" in record:
            model = vs_ensemble.ensemble_from_record(record["ensemble"])
        else:
            model = ocsvm.model_from_record(record["model"])
            if model.train_ref is None:
                raise IngestionError(f"{path}: model record holds no training rows")
    except QadError:
        raise
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise IngestionError(f"{path}: malformed model record ({exc!r})") from exc
    return record, fitted, backend, train_seed, model


def _read_points(path):
    """Feature rows and, when a 'label' column is present, +1 / -1 labels."""
    try:
        frame = pd.read_csv(path)
    except FileNotFoundError:
        raise IngestionError(f"points file not found: {path}") from None
    except (pd.errors.EmptyDataError, pd.errors.ParserError) as exc:
        raise IngestionError(f"{path}: unreadable points CSV") from exc
    if frame.empty:
        raise IngestionError(f"{path}: no points")
    labels = None
    if "label" in frame.columns:
        labels = pd.to_numeric(frame.pop("label"), errors="coerce").to_numpy()
        if not np.all(np.isin(labels, (ocsvm.NORMAL, ocsvm.ANOMALY))):
            raise IngestionError(f"{path}: labels must be 1 (normal) or -1 (anomaly)")
        labels = labels.astype(int)
    numeric = frame.apply(pd.to_numeric, errors="coerce")
    bad = numeric.isna().any(axis=1)
    if bad.any():
        raise IngestionError(f"{path}: non-numeric or empty cells in {int(bad.sum())} rows")
    return numeric.to_numpy(dtype=float), labels


def cmd_predict(args) -> int:
    record, fitted, backend, train_seed, model = _load_model(args.model)

    if args.points:
        raw, labels = _read_points(args.points)
    else:
        d = record["data"]
        config = harness.ExperimentConfig(dataset=d["dataset"], method=record["method"], creditcard_path=d.get("path"),
                                          data_sizes=[d["size"]], n_features=d["features"], seeds=[d["seed"]])
        split = harness.build_split(config, d["size"], d["seed"])
        raw, labels = split.test.features, split.test.labels
    X = fitted.transform(raw)
    test_seed = seeding.derive_seed(args.seed if args.seed is not None else record["data"]["seed"], 2)

    if isinstance(model, vs_ensemble.VsEnsemble):
        vs_ensemble.restore_contexts(model, backend.context_for, seed=train_seed)
        scores = vs_ensemble.score(model, X, backend.cross, seed=test_seed)
    else:
        context = backend.context_for(model.train_ref, train_seed)
        scores = ocsvm.decision_scores(model, backend.cross(X, model.train_ref, context, test_seed))

    out = Path(args.out or "predictions.csv")
    pd.DataFrame({"score": scores, "prediction": ocsvm.predict(scores)}).to_csv(out, index=False)
    log.info("wrote %d predictions to %s (%d flagged)", scores.size, out, int(np.sum(scores < 0)))
    if labels is not None:
        rep = evaluate(labels, scores)
        log.info("precision=%.3f recall=%.3f f1=%.3f AP=%.3f (random AP %.3f)",
                 rep.precision, rep.recall, rep.f1, rep.average_precision, rep.anomaly_ratio)
    return 0


def cmd_experiment(args) -> int:
    if args.config:
        config = harness.load_config(args.config)
    else:
        config = harness.ExperimentConfig(dataset=args.dataset or "synthetic", method=args.method or "inversion")
    overrides = {}
    if args.method:
        overrides["method"] = args.method
    if args.dataset:
        overrides["dataset"] = args.dataset
    if args.size:
        overrides["data_sizes"] = args.size
    if args.features:
        if config.sweep == "features":
            overrides["feature_counts"] = args.features
        else:
            overrides["n_features"] = args.features[0]
    if args.seed is not None:
        overrides["seeds"] = [args.seed]
    if args.seeds:
        overrides["seeds"] = harness.parse_seeds(args.seeds)
    if args.shots:
        overrides["shots"] = args.shots
    if args.settings:
        overrides["r"] = args.settings
    if args.workers:
        overrides["workers"] = args.workers
    if args.data:
        overrides["creditcard_path"] = args.data
    if overrides:
        mapping = config.to_mapping()
        mapping.update(overrides)
        config = harness.ExperimentConfig.from_mapping(mapping)

    results = harness.run_experiment(config, results_path=args.out, resume=not args.fresh, show_progress=True)
    for r in results:
        log.info("seed=%d n=%d d=%d AP=%.3f F1=%.3f train=%.2fs test=%.2fs hw=%.3g s",
                 r.seed, r.n_train, r.n_features, r.report.average_precision, r.report.f1,
                 r.train_seconds, r.test_seconds, r.hardware_seconds)
    return 0


def cmd_report(args) -> int:
    paths = report.build_report(args.results or harness.RESULTS_PATH, args.out or "report")
    for p in paths:
        log.info("wrote %s", p)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Kernel one-class SVM anomaly detection experiments")
    parser.add_argument("--verbose", "-v", action="store_true", help="debug logging")
    parser.add_argument("--log-file", type=str, default=None, help="also log to this file")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="write a train/test split as CSV")
    _add_data_args(p)
    p.add_argument("--out", type=str, default=None, help="output directory")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("kernel", help="compute and save a training kernel matrix")
    _add_data_args(p)
    _add_model_args(p)
    p.add_argument("--out", type=str, default=None, help="output .qkm path")
    p.add_argument("--csv", action="store_true", help="also export the matrix as CSV")
    p.set_defaults(func=cmd_kernel)

    p = sub.add_parser("train", help="train an OC-SVM or variable-subsampling ensemble")
    _add_data_args(p)
    _add_model_args(p)
    p.add_argument("--out", type=str, default=None, help="output model YAML")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="score points with a saved model")
    p.add_argument("model", type=str, help="model YAML from 'train'")
    p.add_argument("--points", type=str, default=None, help="raw feature CSV (default: the model's test split)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", type=str, default=None, help="output predictions CSV")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("experiment", help="run a sweep and append results")
    p.add_argument("--config", type=str, default=None, help="YAML experiment config")
    p.add_argument("--dataset", choices=["synthetic", "creditcard"], default=None)
    p.add_argument("--data", type=str, default=None, help="credit-card CSV")
    p.add_argument("--method", choices=harness.METHODS, default=None)
    p.add_argument("--size", type=int, nargs="+", default=None, help="training sizes")
    p.add_argument("--features", type=int, nargs="+", default=None, help="feature counts (one for a size sweep)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--seeds", type=str, default=None, help="e.g. 0-14")
    p.add_argument("--shots", type=int, default=None)
    p.add_argument("--settings", type=int, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--fresh", action="store_true", help="ignore cells already in the results file")
    p.add_argument("--out", type=str, default=None, help="results JSONL (default QAD_RESULTS_PATH)")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("report", help="summarize a results file into CSV tables")
    p.add_argument("--results", type=str, default=None)
    p.add_argument("--out", type=str, default=None, help="output directory")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.verbose, args.log_file)
    try:
        return args.func(args)
    except QadError as e:
        log.error("%s: %s", type(e).__name__, e)
        for note in getattr(e, "__notes__", []):
            log.error("  %s", note)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
