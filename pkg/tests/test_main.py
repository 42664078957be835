import pandas as pd
import yaml

import main


def test_gen_data_synthetic(tmp_path):
    out = tmp_path / "split"
    assert main.main(["gen-data", "--size", "120", "--seed", "2", "--out", str(out)]) == 0
    train = pd.read_csv(out / "train.csv")
    test = pd.read_csv(out / "test.csv")
    assert train.shape == (120, 3)
    assert (test["label"] == -1).sum() == 37


def test_gen_data_creditcard_writes_manifest(tmp_path, creditcard_csv):
    out = tmp_path / "split"
    argv = ["gen-data", "--dataset", "creditcard", "--data", str(creditcard_csv), "--size", "300", "--out", str(out)]
    assert main.main(argv) == 0
    manifest = yaml.safe_load((out / "split.yaml").read_text())
    assert len(manifest["train"]) == 300 and len(manifest["test"]) == 125


def test_kernel_command(tmp_path):
    out = tmp_path / "k.qkm"
    argv = ["kernel", "--method", "inversion", "--size", "60", "--shots", "200", "--out", str(out), "--csv"]
    assert main.main(argv) == 0
    assert out.exists() and out.with_suffix(".csv").exists()


def test_train_then_predict(tmp_path):
    model = tmp_path / "model.yaml"
    assert main.main(["train", "--method", "rbf", "--size", "150", "--out", str(model)]) == 0
    preds = tmp_path / "preds.csv"
    assert main.main(["predict", str(model), "--out", str(preds)]) == 0
    frame = pd.read_csv(preds)
    assert len(frame) == 125
    assert set(frame["prediction"]) <= {-1, 1}


def test_train_then_predict_ensemble(tmp_path):
    model = tmp_path / "vs.yaml"
    assert main.main(["train", "--method", "vs_max", "--size", "200", "--shots", "300", "--out", str(model)]) == 0
    record = yaml.safe_load(model.read_text())
    assert len(record["ensemble"]["components"]) == 2

    points = tmp_path / "points.csv"
    pd.DataFrame({"x0": [2.0, -2.0, 0.0, 3.9], "x1": [2.0, -2.1, 0.1, -3.9]}).to_csv(points, index=False)
    preds = tmp_path / "preds.csv"
    assert main.main(["predict", str(model), "--points", str(points), "--out", str(preds)]) == 0
    assert len(pd.read_csv(preds)) == 4


def test_experiment_and_report(tmp_path):
    runs = tmp_path / "runs.jsonl"
    argv = ["experiment", "--method", "rbf", "--size", "100", "150", "--seeds", "0-1", "--out", str(runs)]
    assert main.main(argv) == 0
    assert len(runs.read_text().splitlines()) == 4
    assert main.main(["report", "--results", str(runs), "--out", str(tmp_path / "report")]) == 0
    assert (tmp_path / "report" / "performance_synthetic_size.csv").exists()


def test_exit_codes(tmp_path):
    assert main.main(["experiment", "--config", str(tmp_path / "absent.yaml")]) == 2
    assert main.main(["experiment", "--method", "vs_average", "--size", "60", "--out", str(tmp_path / "r.jsonl")]) == 2
    absent = tmp_path / "absent.csv"
    assert main.main(["gen-data", "--dataset", "creditcard", "--data", str(absent)]) == 3
    assert main.main(["predict", str(tmp_path / "no_model.yaml")]) == 3


def test_predict_rejects_malformed_inputs(tmp_path):
    model = tmp_path / "model.yaml"
    assert main.main(["train", "--method", "rbf", "--size", "120", "--out", str(model)]) == 0

    words = tmp_path / "words.csv"
    pd.DataFrame({"x0": [1.0, "abc"], "x1": [0.5, 0.2]}).to_csv(words, index=False)
    assert main.main(["predict", str(model), "--points", str(words)]) == 3

    bad_labels = tmp_path / "bad_labels.csv"
    pd.DataFrame({"x0": [1.0], "x1": [0.5], "label": [7]}).to_csv(bad_labels, index=False)
    assert main.main(["predict", str(model), "--points", str(bad_labels)]) == 3

    empty = tmp_path / "empty.csv"
    empty.write_text("")
    assert main.main(["predict", str(model), "--points", str(empty)]) == 3

    broken = tmp_path / "broken.yaml"
    broken.write_text("pipeline: [1, 2\n")
    assert main.main(["predict", str(broken)]) == 3

    record = yaml.safe_load(model.read_text())
    del record["pipeline"]
    partial = tmp_path / "partial.yaml"
    partial.write_text(yaml.safe_dump(record))
    assert main.main(["predict", str(partial)]) == 3

    record = yaml.safe_load(model.read_text())
    record["model"].pop("alphas")
    no_alphas = tmp_path / "no_alphas.yaml"
    no_alphas.write_text(yaml.safe_dump(record))
    assert main.main(["predict", str(no_alphas)]) == 3
