# qsim.py
"""
Dense statevector simulator for the feature-map circuits.

Conventions:
  - little-endian: bit q of the amplitude index is qubit q
  - bitstrings in text output are most-significant qubit first
  - RZ(t)  = diag(e^{-it/2}, e^{it/2})
  - RZZ(t) = phase e^{-it/2} when the two bits agree, e^{it/2} otherwise

Functions working on raw amplitude arrays accept any leading batch axes, so the
kernels can push a whole dataset through the feature map at once.
"""
import logging
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np

from errors import CapacityError, DimensionError

logger = logging.getLogger(__name__)

MAX_QUBITS = 20
NORM_TOL = 1e-10

H_MATRIX = np.array([[1.0, 1.0], [1.0, -1.0]], dtype=np.complex128) / math.sqrt(2.0)


# ---------------- types ------------------------------------------------------

@dataclass
class Statevector:
    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.complex128)
        if self.amplitudes.shape != (2 ** self.n_qubits,):
            raise DimensionError(
                f"statevector for {self.n_qubits} qubits needs {2 ** self.n_qubits} amplitudes, "
                f"got shape {self.amplitudes.shape}"
            )

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


@dataclass(frozen=True)
class H:
    q: int


@dataclass(frozen=True)
class RZ:
    q: int
    theta: float


@dataclass(frozen=True)
class RZZ:
    q1: int
    q2: int
    theta: float


Gate = Union[H, RZ, RZZ]


@dataclass(frozen=True)
class FeatureMapConfig:
    """
    IQP-like feature map. The default ("figure") reading repeats the unscaled
    (H, U_Z) block 2*lambda times; the "equation" reading uses two blocks with
    single-qubit angles scaled by lambda and pair angles by lambda squared.
    """
    n_qubits: int
    reuploadings: int = 3
    block_reps: int = 6
    angle_scale: float = 1.0
    pair_scale: float = 1.0

    def __post_init__(self):
        if self.n_qubits < 1:
            raise CapacityError(f"feature map needs at least 1 qubit, got {self.n_qubits}")
        if self.n_qubits > MAX_QUBITS:
            raise CapacityError(f"feature map on {self.n_qubits} qubits exceeds the {MAX_QUBITS}-qubit limit")
        if self.reuploadings < 1:
            raise CapacityError(f"reuploadings must be >= 1, got {self.reuploadings}")
        if self.block_reps < 2:
            raise CapacityError(f"block_reps must be >= 2, got {self.block_reps}")

    @classmethod
    def figure_reading(cls, n_qubits: int, reuploadings: int = 3) -> "FeatureMapConfig":
        return cls(n_qubits, reuploadings, block_reps=2 * reuploadings, angle_scale=1.0, pair_scale=1.0)

    @classmethod
    def equation_reading(cls, n_qubits: int, reuploadings: int = 3) -> "FeatureMapConfig":
        lam = float(reuploadings)
        return cls(n_qubits, reuploadings, block_reps=2, angle_scale=lam, pair_scale=lam * lam)

    @classmethod
    def from_reading(cls, reading: str, n_qubits: int, reuploadings: int = 3) -> "FeatureMapConfig":
        if reading == "figure":
            return cls.figure_reading(n_qubits, reuploadings)
        if reading == "equation":
            return cls.equation_reading(n_qubits, reuploadings)
        raise CapacityError(f"unknown feature map reading {reading!r}")

    @property
    def pairs(self) -> List[Tuple[int, int]]:
        return list(combinations(range(self.n_qubits), 2))

    def to_record(self) -> dict:
        return {
            "n_qubits": self.n_qubits,
            "reuploadings": self.reuploadings,
            "block_reps": self.block_reps,
            "angle_scale": self.angle_scale,
            "pair_scale": self.pair_scale,
        }


@dataclass
class LocalUnitarySetting:
    per_qubit: np.ndarray  # shape (n_qubits, 2, 2)
    n_qubits: int = field(init=False)

    def __post_init__(self):
        self.per_qubit = np.asarray(self.per_qubit, dtype=np.complex128)
        if self.per_qubit.ndim != 3 or self.per_qubit.shape[1:] != (2, 2):
            raise DimensionError(f"local unitary setting needs shape (n, 2, 2), got {self.per_qubit.shape}")
        self.n_qubits = self.per_qubit.shape[0]

    @classmethod
    def identity(cls, n_qubits: int) -> "LocalUnitarySetting":
        return cls(np.broadcast_to(np.eye(2, dtype=np.complex128), (n_qubits, 2, 2)).copy())


# ---------------- raw amplitude helpers --------------------------------------

def _check_qubit(q: int, n_qubits: int):
    if not 0 <= q < n_qubits:
        raise DimensionError(f"qubit index {q} out of range for {n_qubits} qubits")


def _apply_1q(amps: np.ndarray, u: np.ndarray, q: int, n_qubits: int) -> np.ndarray:
    """Apply a 2x2 matrix to qubit q along the last axis of amps."""
    lead = amps.shape[:-1]
    t = amps.reshape(lead + (2 ** (n_qubits - q - 1), 2, 2 ** q))
    out = np.einsum("ab,...xbz->...xaz", u, t)
    return out.reshape(amps.shape)


def z_signs(n_qubits: int) -> np.ndarray:
    """(2^n, n) matrix of Z eigenvalues: +1 where bit q is 0, -1 where it is 1."""
    idx = np.arange(2 ** n_qubits)[:, None]
    bits = (idx >> np.arange(n_qubits)[None, :]) & 1
    return 1.0 - 2.0 * bits


def bitstring(index: int, n_qubits: int) -> str:
    return format(index, f"0{n_qubits}b")


# ---------------- operations -------------------------------------------------

def zero_state(n_qubits: int) -> Statevector:
    if not 1 <= n_qubits <= MAX_QUBITS:
        raise CapacityError(f"n_qubits must lie in [1, {MAX_QUBITS}], got {n_qubits}")
    amps = np.zeros(2 ** n_qubits, dtype=np.complex128)
    amps[0] = 1.0
    return Statevector(n_qubits, amps)


def apply_gate(state: Statevector, gate: Gate) -> Statevector:
    n = state.n_qubits
    amps = state.amplitudes
    if isinstance(gate, H):
        _check_qubit(gate.q, n)
        out = _apply_1q(amps, H_MATRIX, gate.q, n)
    elif isinstance(gate, RZ):
        _check_qubit(gate.q, n)
        z = z_signs(n)[:, gate.q]
        out = amps * np.exp(-0.5j * gate.theta * z)
    elif isinstance(gate, RZZ):
        _check_qubit(gate.q1, n)
        _check_qubit(gate.q2, n)
        if gate.q1 == gate.q2:
            raise DimensionError(f"RZZ needs two distinct qubits, got {gate.q1} twice")
        zs = z_signs(n)
        out = amps * np.exp(-0.5j * gate.theta * zs[:, gate.q1] * zs[:, gate.q2])
    else:
        raise DimensionError(f"unsupported gate {gate!r}")
    return Statevector(n, out)


def apply_gates(state: Statevector, gates: Sequence[Gate]) -> Statevector:
    for g in gates:
        state = apply_gate(state, g)
    return state


def _check_point(config: FeatureMapConfig, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (config.n_qubits,):
        raise DimensionError(f"feature map expects {config.n_qubits} features, got shape {x.shape}")
    return x


def feature_map_gates(config: FeatureMapConfig, x) -> List[Gate]:
    """Gate list of U_Phi(x), in application order."""
    x = _check_point(config, x)
    d = config.n_qubits
    gates: List[Gate] = []
    for _ in range(config.block_reps):
        gates.extend(H(q) for q in range(d))
        gates.extend(RZ(j, config.angle_scale * 2.0 * x[j]) for j in range(d))
        gates.extend(RZZ(j, k, config.pair_scale * 2.0 * x[j] * x[k]) for j, k in config.pairs)
    return gates


def inverse_gates(gates: Sequence[Gate]) -> List[Gate]:
    out: List[Gate] = []
    for g in reversed(gates):
        if isinstance(g, H):
            out.append(g)
        elif isinstance(g, RZ):
            out.append(RZ(g.q, -g.theta))
        else:
            out.append(RZZ(g.q1, g.q2, -g.theta))
    return out


def apply_feature_map(config: FeatureMapConfig, x) -> Statevector:
    """Gate-by-gate preparation of |Phi(x)> from |0^d>."""
    return apply_gates(zero_state(config.n_qubits), feature_map_gates(config, x))


def feature_map_states(config: FeatureMapConfig, X) -> np.ndarray:
    """
    Batched |Phi(x)> for every row of X, shape (n_points, 2^d).

    The RZ and RZZ gates of one block are all diagonal, so each block's phase is
    applied as a single elementwise product.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    d = config.n_qubits
    if X.shape[1] != d:
        raise DimensionError(f"feature map expects {d} features, got {X.shape[1]}")
    zs = z_signs(d)
    pairs = config.pairs
    phase_arg = 2.0 * config.angle_scale * (X @ zs.T)
    if pairs:
        j, k = np.array(pairs).T
        zz = zs[:, j] * zs[:, k]
        phase_arg = phase_arg + 2.0 * config.pair_scale * ((X[:, j] * X[:, k]) @ zz.T)
    phase = np.exp(-0.5j * phase_arg)

    amps = np.zeros((X.shape[0], 2 ** d), dtype=np.complex128)
    amps[:, 0] = 1.0
    for _ in range(config.block_reps):
        for q in range(d):
            amps = _apply_1q(amps, H_MATRIX, q, d)
        amps = amps * phase
    return amps


def fidelity(a: Statevector, b: Statevector) -> float:
    if a.n_qubits != b.n_qubits:
        raise DimensionError(f"fidelity between {a.n_qubits}- and {b.n_qubits}-qubit states")
    f = abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2
    return float(min(1.0, max(0.0, f)))


def sample_bitstrings(state: Statevector, shots: int, rng: np.random.Generator) -> Dict[str, int]:
    if shots < 1:
        raise DimensionError(f"shots must be >= 1, got {shots}")
    p = state.probabilities()
    p = p / p.sum()
    counts = rng.multinomial(shots, p)
    return {bitstring(int(i), state.n_qubits): int(counts[i]) for i in np.flatnonzero(counts)}


def sample_haar_local(n_qubits: int, rng: np.random.Generator) -> LocalUnitarySetting:
    """Independent Haar SU(2) matrix per qubit (QR of a complex Gaussian, phase-fixed)."""
    if n_qubits < 1:
        raise CapacityError(f"n_qubits must be >= 1, got {n_qubits}")
    z = (rng.standard_normal((n_qubits, 2, 2)) + 1j * rng.standard_normal((n_qubits, 2, 2))) / math.sqrt(2.0)
    q, r = np.linalg.qr(z)
    diag = np.diagonal(r, axis1=1, axis2=2)
    q = q * (diag / np.abs(diag))[:, None, :]
    det = np.linalg.det(q)
    q = q / np.sqrt(det)[:, None, None]
    return LocalUnitarySetting(q)


def rotate_amplitudes(amps: np.ndarray, setting: LocalUnitarySetting) -> np.ndarray:
    """Apply the tensor-product setting along the last axis of amps (batched)."""
    n = setting.n_qubits
    if amps.shape[-1] != 2 ** n:
        raise DimensionError(f"setting on {n} qubits applied to amplitudes of length {amps.shape[-1]}")
    for q in range(n):
        amps = _apply_1q(amps, setting.per_qubit[q], q, n)
    return amps


def apply_local_unitary(state: Statevector, setting: LocalUnitarySetting) -> Statevector:
    if setting.n_qubits != state.n_qubits:
        raise DimensionError(f"setting on {setting.n_qubits} qubits applied to a {state.n_qubits}-qubit state")
    return Statevector(state.n_qubits, rotate_amplitudes(state.amplitudes, setting))
