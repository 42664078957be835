import numpy as np
import pytest

import harness
from errors import ConfigError, DataError
from harness import ExperimentConfig


def _config(tmp_path, **kwargs):
    base = dict(dataset="synthetic", method="rbf", data_sizes=[250], seeds=[0],
                results_path=str(tmp_path / "runs.jsonl"), workers=1)
    base.update(kwargs)
    return ExperimentConfig(**base)


def test_parse_seeds():
    assert harness.parse_seeds("0-14") == list(range(15))
    assert harness.parse_seeds("0-2,7") == [0, 1, 2, 7]
    with pytest.raises(ConfigError):
        harness.parse_seeds("a-b")
    with pytest.raises(ConfigError):
        harness.parse_seeds(" , ")


def test_hardware_time_estimates():
    assert harness.estimate_hardware_seconds(5000, 5000) == 1.0
    years = harness.seconds_to_years(harness.estimate_hardware_seconds(4e13, 5000))
    assert abs(years - 255) / 255 <= 0.02
    shots = harness.inversion_total_shots(284000, 1000)
    assert shots == pytest.approx(4.03e13, rel=0.01)
    assert harness.full_kernel_evaluations(284000) == pytest.approx(4.03e10, rel=0.01)
    with pytest.raises(ConfigError):
        harness.estimate_hardware_seconds(10, 0)


def test_cost_formulas():
    assert harness.randomized_total_shots(500, 30, 9000) == 135_000_000
    assert harness.vs_expected_train_entries(15, 50, 100) == 15 * 75 ** 2
    assert harness.vs_expected_test_entries(2, 50, 100, 125) == 2 * 75 * 125


def test_expected_costs_per_method(tmp_path):
    inversion = harness.expected_costs(_config(tmp_path, method="inversion", shots=1000), 500, 125)
    assert inversion == {"expected_train_cost": 125_250.0, "expected_test_cost": 62_500.0,
                         "expected_train_shots": 125_250_000.0}
    randomized = harness.expected_costs(_config(tmp_path, method="randomized", r=30, s=9000), 500, 125)
    assert randomized["expected_train_shots"] == 135_000_000.0
    vs = harness.expected_costs(_config(tmp_path, method="vs_max", data_sizes=[1500]), 1500, 125)
    assert vs["expected_train_cost"] == 15 * 75 ** 2
    assert vs["expected_test_cost"] == 15 * 75 * 125
    assert vs["expected_train_shots"] is None


def test_scaling_fit():
    sizes = np.array([250, 500, 1000, 2000])
    assert harness.scaling_fit(sizes, 3e-4 * sizes) == pytest.approx(1.0)
    assert harness.scaling_fit(sizes, 1e-6 * sizes ** 2) == pytest.approx(2.0)
    with pytest.raises(DataError):
        harness.scaling_fit([1, 2], [1, 2])
    with pytest.raises(DataError):
        harness.scaling_fit([1, 2, 3], [1, 0, 2])


def test_config_validation(tmp_path):
    with pytest.raises(ConfigError, match="nu"):
        ExperimentConfig.from_mapping({"nu": 2})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_mapping({"bogus": 1})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_mapping({"dataset": "synthetic", "sweep": "features"})
    with pytest.raises(ConfigError, match="n_max"):
        ExperimentConfig(method="vs_average", data_sizes=[80])
    with pytest.raises(ConfigError):
        harness.load_config(tmp_path / "absent.yaml")


def test_config_from_yaml(tmp_path):
    path = tmp_path / "exp.yaml"
    path.write_text("dataset: creditcard\nmethod: randomized\nsweep: features\nfeature_counts: [2, 3]\nseeds: 0-1\nlambda: 2\n")
    config = harness.load_config(path)
    assert config.lam == 2
    assert config.seeds == [0, 1]
    assert config.data_sizes == [500]
    assert config.cells() == [(0, 500, 2), (1, 500, 2), (0, 500, 3), (1, 500, 3)]
    assert config.feature_map(3).block_reps == 4


def test_fingerprint_ignores_seeds(tmp_path):
    a = _config(tmp_path, seeds=[0])
    assert a.fingerprint() == _config(tmp_path, seeds=[1, 2]).fingerprint()
    assert a.fingerprint() != _config(tmp_path, nu=0.2).fingerprint()


def test_single_synthetic_cell(tmp_path):
    config = _config(tmp_path)
    results = harness.run_experiment(config)
    assert len(results) == 1
    r = results[0]
    assert r.n_test == 125 and r.n_train == 250
    assert 0.0 <= r.report.average_precision <= 1.0
    assert r.train_evaluations == 250 * 251 // 2
    assert r.test_evaluations == 125 * 250
    assert r.hardware_seconds == 0.0

    again = harness.run_experiment(config, results_path=tmp_path / "other.jsonl")
    assert again[0].report == r.report
    assert again[0].train_evaluations == r.train_evaluations


def test_resume_skips_finished_cells(tmp_path):
    config = _config(tmp_path, seeds=[0, 1])
    first = harness.run_experiment(config)
    lines = (tmp_path / "runs.jsonl").read_text().splitlines()
    assert len(lines) == 2
    second = harness.run_experiment(config)
    assert (tmp_path / "runs.jsonl").read_text().splitlines() == lines
    assert [r.report for r in second] == [r.report for r in first]


def test_vs_cell_counts_component_entries(tmp_path):
    config = _config(tmp_path, method="vs_average")
    r = harness.run_experiment(config)[0]
    assert r.n_components == 2
    sizes_sum = r.test_entries // 125
    assert 2 * 50 <= sizes_sum <= 2 * 100
    assert r.test_shots == r.test_evaluations * 1000
    assert r.train_shots == r.train_evaluations * 1000


def test_creditcard_inversion_cell(tmp_path, creditcard_csv):
    config = _config(tmp_path, dataset="creditcard", method="inversion", data_sizes=[500], n_features=6,
                     creditcard_path=str(creditcard_csv))
    r = harness.run_experiment(config)[0]
    assert r.train_evaluations == 125_250
    assert r.train_shots == 125_250 * 1000 == r.expected_train_shots
    assert r.test_evaluations == 125 * 500
    assert r.hardware_seconds == pytest.approx((125_250 + 62_500) * 1000 / 5000)
    assert r.report.tp + r.report.fn == 6


def test_randomized_cell_counts_shots(tmp_path, creditcard_csv):
    config = _config(tmp_path, dataset="creditcard", method="randomized", data_sizes=[200],
                     n_features=3, r=10, s=500, creditcard_path=str(creditcard_csv))
    r = harness.run_experiment(config)[0]
    assert r.train_shots == 200 * 10 * 500
    assert r.test_shots == 125 * 10 * 500
