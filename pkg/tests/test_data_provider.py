import numpy as np
import pandas as pd
import pytest

import data_provider
from conftest import write_creditcard_csv
from errors import ConfigError, IngestionError
from ocsvm import ANOMALY, NORMAL


def test_synthetic_split_shape():
    split = data_provider.gen_synthetic(250, seed=0)
    assert split.train.features.shape == (250, 2)
    assert np.all(split.train.labels == NORMAL)
    assert split.test.n_rows == 125
    assert split.test.n_anomalies == 37
    assert np.all(np.abs(split.test.features[split.test.labels == ANOMALY]) <= 4.0)


def test_synthetic_blobs_are_balanced():
    train = data_provider.gen_synthetic(251, seed=1).train.features
    upper = train[:, 0] > 0
    assert upper.sum() == 126
    assert np.allclose(train[upper].mean(axis=0), [2.0, 2.0], atol=0.1)
    assert np.allclose(train[~upper].mean(axis=0), [-2.0, -2.0], atol=0.1)


def test_synthetic_is_deterministic_per_seed():
    a, b = data_provider.gen_synthetic(100, seed=3), data_provider.gen_synthetic(100, seed=3)
    assert np.array_equal(a.train.features, b.train.features)
    assert np.array_equal(a.test.labels, b.test.labels)
    assert not np.array_equal(a.train.features, data_provider.gen_synthetic(100, seed=4).train.features)
    with pytest.raises(ConfigError):
        data_provider.gen_synthetic(3)


def test_load_three_row_file(tmp_path):
    path = write_creditcard_csv(tmp_path / "tiny.csv", n_rows=3, n_anomalies=1)
    data = data_provider.load_creditcard(path)
    assert data.features.shape == (3, 28)
    assert data.n_anomalies == 1


def test_malformed_files(tmp_path):
    header_only = tmp_path / "header.csv"
    header_only.write_text(",".join(data_provider.CREDITCARD_COLUMNS) + "\n")
    with pytest.raises(IngestionError, match="header only"):
        data_provider.load_creditcard(header_only)

    path = write_creditcard_csv(tmp_path / "cc.csv", n_rows=10, n_anomalies=2)
    df = pd.read_csv(path)
    df.drop(columns=["V7"]).to_csv(tmp_path / "missing.csv", index=False)
    with pytest.raises(IngestionError, match="V7"):
        data_provider.load_creditcard(tmp_path / "missing.csv")

    df["V3"] = df["V3"].astype(object)
    df.loc[4, "V3"] = "oops"
    df.to_csv(tmp_path / "text.csv", index=False)
    with pytest.raises(IngestionError, match="non-numeric"):
        data_provider.load_creditcard(tmp_path / "text.csv")

    with pytest.raises(IngestionError, match="not found"):
        data_provider.load_creditcard(tmp_path / "absent.csv")


def test_class_values_are_checked(tmp_path):
    path = write_creditcard_csv(tmp_path / "cc.csv", n_rows=10, n_anomalies=2)
    df = pd.read_csv(path)
    df.loc[0, "Class"] = 2
    df.to_csv(path, index=False)
    with pytest.raises(IngestionError, match="Class"):
        data_provider.load_creditcard(path)


def test_make_split(creditcard_csv):
    data = data_provider.load_creditcard(creditcard_csv)
    split = data_provider.make_split(data, 500, seed=0)
    assert split.train.n_rows == 500 and split.train.n_anomalies == 0
    assert split.test.n_rows == 125 and split.test.n_anomalies == 6
    assert np.intersect1d(split.train_indices, split.test_indices).size == 0
    assert np.unique(split.train_indices).size == 500

    other = data_provider.make_split(data, 500, seed=1)
    assert not np.array_equal(split.train_indices, other.train_indices)
    again = data_provider.make_split(data, 500, seed=0)
    assert np.array_equal(split.test_indices, again.test_indices)


def test_split_needs_enough_rows(creditcard_csv):
    data = data_provider.load_creditcard(creditcard_csv)
    with pytest.raises(IngestionError, match="normal rows"):
        data_provider.make_split(data, 900, seed=0)
    with pytest.raises(IngestionError, match="anomalies"):
        data_provider.make_split(data, 100, seed=0, n_test=125, n_test_anomalies=30)


def test_split_manifest_reload(tmp_path, creditcard_csv):
    data = data_provider.load_creditcard(creditcard_csv)
    split = data_provider.make_split(data, 200, seed=2)
    path = data_provider.save_split_manifest(split, tmp_path / "split.yaml")
    again = data_provider.load_split_manifest(path, data)
    assert np.array_equal(again.train.features, split.train.features)
    assert np.array_equal(again.test.labels, split.test.labels)
    assert again.seed == 2

    small = data_provider.Dataset(data.features[:50], data.labels[:50], "small")
    with pytest.raises(IngestionError, match="outside"):
        data_provider.load_split_manifest(path, small)


def test_fetch_without_url_explains_itself(tmp_path):
    with pytest.raises(IngestionError, match="QAD_CREDITCARD_PATH"):
        data_provider.fetch_creditcard(url="", cache_dir=tmp_path)


def test_fetch_uses_cache(tmp_path, creditcard_csv):
    cached = tmp_path / "creditcard.csv"
    assert cached == creditcard_csv
    assert data_provider.fetch_creditcard(url="http://unused.invalid/cc.csv", cache_dir=tmp_path) == cached
