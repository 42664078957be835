import numpy as np
import pandas as pd
import pytest

from data_provider import CREDITCARD_COLUMNS
from qsim import FeatureMapConfig


def write_creditcard_csv(path, n_rows=1000, n_anomalies=20, seed=0):
    """Small file with the real schema; anomalies are shifted away from the normal cloud."""
    rng = np.random.default_rng(seed)
    features = rng.standard_normal((n_rows, 28))
    klass = np.zeros(n_rows, dtype=int)
    anomalous = rng.choice(n_rows, size=n_anomalies, replace=False)
    klass[anomalous] = 1
    features[anomalous] += rng.uniform(3.0, 5.0, size=(n_anomalies, 28)) * rng.choice([-1.0, 1.0], size=(n_anomalies, 28))
    frame = pd.DataFrame(features, columns=[f"V{i}" for i in range(1, 29)])
    frame.insert(0, "Time", np.arange(n_rows, dtype=float))
    frame["Amount"] = rng.uniform(0.0, 500.0, size=n_rows)
    frame["Class"] = klass
    frame = frame[CREDITCARD_COLUMNS]
    frame.to_csv(path, index=False)
    return path


@pytest.fixture
def creditcard_csv(tmp_path):
    return write_creditcard_csv(tmp_path / "creditcard.csv")


@pytest.fixture
def fmap2():
    return FeatureMapConfig.figure_reading(2, 3)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
