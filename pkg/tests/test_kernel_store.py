import numpy as np
import pytest

import kernel_store
import kernels
from errors import IngestionError
from kernels import KernelMethod, RbfConfig


def test_saved_kernel_reloads_bit_exact(tmp_path, rng):
    X = rng.normal(size=(7, 3))
    K = kernels.rbf_matrix(X, X, RbfConfig(np.float64(0.25)))
    path = kernel_store.save_kernel(K, tmp_path / "k.qkm")
    loaded = kernel_store.load_kernel(path)
    assert np.array_equal(loaded.values, K.values)
    assert loaded.method == KernelMethod.RBF
    assert loaded.meta["gamma"] == 0.25
    assert loaded.meta["evaluations"] == 28


def test_bad_files_are_rejected(tmp_path):
    bad = tmp_path / "bad.qkm"
    bad.write_bytes(b"NOPE" + bytes(12))
    with pytest.raises(IngestionError, match="magic"):
        kernel_store.load_kernel(bad)
    bad.write_bytes(b"QK")
    with pytest.raises(IngestionError):
        kernel_store.load_kernel(bad)


def test_truncated_body_is_rejected(tmp_path, rng):
    X = rng.normal(size=(3, 2))
    path = kernel_store.save_kernel(kernels.rbf_matrix(X, X, RbfConfig(1.0)), tmp_path / "k.qkm")
    path.write_bytes(path.read_bytes()[:-10])
    with pytest.raises(IngestionError, match="size"):
        kernel_store.load_kernel(path)


def test_csv_export(tmp_path):
    K = kernels.KernelMatrix(np.array([[1.0, 0.25], [0.25, 1.0]]), KernelMethod.FIDELITY_EXACT)
    path = kernel_store.export_csv(K, tmp_path / "k.csv")
    assert np.array_equal(np.loadtxt(path, delimiter=","), K.values)
