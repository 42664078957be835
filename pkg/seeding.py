# seeding.py
"""
Counter-based randomness keyed by integer tuples.

Every random draw in the kernels is addressed by (seed, stream, i, j, k), so a
matrix entry does not depend on which other entries were computed before it,
or in which order, or in how many blocks.
"""
from typing import Sequence

import numpy as np

_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)

# stream ids, one per consumer
STREAM_INVERSION = 11
STREAM_SWAP = 12
STREAM_HAAR = 21
STREAM_RM_SHOTS = 22
STREAM_VS_PLAN = 31
STREAM_VS_COMPONENT = 32
STREAM_SPLIT = 41


def _splitmix(x: np.ndarray) -> np.ndarray:
    z = (x + _GOLDEN) & _MASK
    z = ((z ^ (z >> np.uint64(30))) * _MIX1) & _MASK
    z = ((z ^ (z >> np.uint64(27))) * _MIX2) & _MASK
    return z ^ (z >> np.uint64(31))


def _hash_keys(keys: Sequence) -> np.ndarray:
    arrays = np.broadcast_arrays(*[np.asarray(k, dtype=np.int64) for k in keys])
    h = np.zeros(arrays[0].shape, dtype=np.uint64)
    with np.errstate(over="ignore"):
        for a in arrays:
            h = _splitmix(h ^ a.astype(np.uint64))
    return h


def entry_uniforms(*keys) -> np.ndarray:
    """Uniform draws in the open interval (0, 1), one per broadcast key tuple."""
    h = _hash_keys(keys)
    return ((h >> np.uint64(11)).astype(np.float64) + 0.5) * (1.0 / 9007199254740992.0)


def derive_seed(*keys: int) -> int:
    """Collapse a key tuple into a single 63-bit seed."""
    h = _hash_keys([np.asarray([k]) for k in keys])
    return int(h[0] >> np.uint64(1))


def keyed_rng(*keys: int) -> np.random.Generator:
    """A numpy Generator whose stream is fixed by the key tuple alone."""
    return np.random.default_rng([int(k) & 0xFFFFFFFFFFFFFFFF for k in keys] + [len(keys)])
