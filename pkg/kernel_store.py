# kernel_store.py
"""
Kernel matrix files.

Binary layout (all little-endian):
  bytes 0..3    magic "QKM1"
  bytes 4..7    u32 rows
  bytes 8..11   u32 cols
  bytes 12..15  u32 length of the metadata trailer
  rows*cols f8  values, row-major
  trailer       YAML mapping: method, seed, shots, r, gamma, counts

A CSV export is provided for eyeballing small matrices.
"""
import logging
import struct
from pathlib import Path
from typing import Union

import numpy as np
import yaml

from errors import IngestionError
from kernels import KernelMatrix, KernelMethod

logger = logging.getLogger(__name__)

MAGIC = b"QKM1"
HEADER = struct.Struct("<4sIII")

PathLike = Union[str, Path]


def _trailer(K: KernelMatrix) -> bytes:
    meta = {"method": K.method.value}
    for key in ("seed", "shots", "r", "gamma", "entries", "evaluations", "total_shots", "circuit", "mitigated"):
        value = K.meta.get(key)
        if value is not None:
            meta[key] = value.item() if isinstance(value, np.generic) else value
    return yaml.safe_dump(meta, sort_keys=True).encode("utf-8")


def save_kernel(K: KernelMatrix, path: PathLike) -> Path:
    path = Path(path)
    rows, cols = K.values.shape
    trailer = _trailer(K)
    with open(path, "wb") as f:
        f.write(HEADER.pack(MAGIC, rows, cols, len(trailer)))
        f.write(np.ascontiguousarray(K.values, dtype="<f8").tobytes())
        f.write(trailer)
    logger.info("saved %dx%d %s kernel to %s", rows, cols, K.method.value, path)
    return path.resolve()


def load_kernel(path: PathLike) -> KernelMatrix:
    raw = Path(path).read_bytes()
    if len(raw) < HEADER.size:
        raise IngestionError(f"{path}: too short for a kernel file")
    magic, rows, cols, trailer_len = HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise IngestionError(f"{path}: bad magic {magic!r}")
    body = rows * cols * 8
    if len(raw) != HEADER.size + body + trailer_len:
        raise IngestionError(f"{path}: size does not match a {rows}x{cols} kernel")
    values = np.frombuffer(raw, dtype="<f8", count=rows * cols, offset=HEADER.size).reshape(rows, cols).copy()
    meta = yaml.safe_load(raw[HEADER.size + body:].decode("utf-8")) or {}
    method = KernelMethod(meta.pop("method"))
    return KernelMatrix(values, method, meta)


def export_csv(K: KernelMatrix, path: PathLike) -> Path:
    path = Path(path)
    np.savetxt(path, K.values, delimiter=",", fmt="%.17g")
    return path.resolve()
