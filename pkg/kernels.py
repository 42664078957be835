# kernels.py
"""
Kernel backends: RBF, exact fidelity, shot-sampled inversion and swap tests,
and randomized measurements with purity mitigation.

Square training matrices are requested by passing the same array object as
both arguments; only the upper triangle is evaluated and mirrored.

Shot noise is drawn per entry from uniforms keyed by (seed, stream, i, j), so
a matrix is bit-identical no matter how its rows are blocked or ordered.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import List, Optional, Sequence, Union

import numpy as np
from scipy.stats import binom

import qsim
import seeding
from errors import (
    CapacityError,
    ConfigError,
    DegenerateDataError,
    DimensionError,
    MitigationError,
    SettingsMismatchError,
)
from qsim import FeatureMapConfig, LocalUnitarySetting

logger = logging.getLogger(__name__)

RM_MAX_QUBITS = 12
SWAP_FULL_MAX_QUBITS = 4
DEFAULT_BLOCK_ROWS = 256


class KernelMethod(str, Enum):
    RBF = "rbf"
    FIDELITY_EXACT = "fidelity_exact"
    INVERSION = "inversion"
    SWAP = "swap"
    RANDOMIZED = "randomized"
    RANDOMIZED_MITIGATED = "randomized_mitigated"


# ---------------- types ------------------------------------------------------

@dataclass
class RbfConfig:
    gamma: float

    def __post_init__(self):
        if not self.gamma > 0:
            raise ConfigError(f"RBF gamma must be positive, got {self.gamma}")


@dataclass
class ProbabilityTable:
    n_points: int
    n_qubits: int
    r: int
    probs: np.ndarray  # (n_points, r, 2^d)
    settings: List[LocalUnitarySetting]
    shots: Optional[int]  # None in exact-probability mode
    seed: int
    purity: Optional[np.ndarray] = None

    @property
    def total_shots(self) -> int:
        return 0 if self.shots is None else self.n_points * self.r * self.shots


@dataclass
class KernelContext:
    """What a trained model needs to build its prediction kernels."""
    gamma: Optional[float] = None
    profile: Optional[ProbabilityTable] = None


@dataclass
class KernelMatrix:
    values: np.ndarray
    method: KernelMethod
    meta: dict = field(default_factory=dict)
    context: KernelContext = field(default_factory=KernelContext)

    @property
    def shape(self):
        return self.values.shape

    def is_square(self) -> bool:
        return self.values.ndim == 2 and self.values.shape[0] == self.values.shape[1]

    def min_eigenvalue(self) -> float:
        sym = 0.5 * (self.values + self.values.T)
        return float(np.linalg.eigvalsh(sym)[0])


def _as_matrix(X) -> np.ndarray:
    return np.atleast_2d(np.asarray(X, dtype=float))


def _check_dims(X: np.ndarray, Y: np.ndarray, expected: Optional[int] = None):
    if X.shape[1] != Y.shape[1]:
        raise DimensionError(f"feature dimensions differ: {X.shape[1]} vs {Y.shape[1]}")
    if expected is not None and X.shape[1] != expected:
        raise DimensionError(f"feature map expects {expected} features, got {X.shape[1]}")


def _counts_meta(n_rows: int, n_cols: int, symmetric: bool) -> dict:
    evaluations = n_rows * (n_rows + 1) // 2 if symmetric else n_rows * n_cols
    return {"entries": n_rows * n_cols, "evaluations": evaluations}


def _mirror_upper(values: np.ndarray) -> np.ndarray:
    return np.triu(values) + np.triu(values, 1).T


# ---------------- RBF --------------------------------------------------------

def gamma_scale(X_train) -> float:
    """1 / (n_features * pooled variance), the usual 'scale' heuristic."""
    X = _as_matrix(X_train)
    var = float(np.var(X))
    if var <= 0.0:
        raise DegenerateDataError("cannot derive RBF gamma from constant training data")
    return 1.0 / (X.shape[1] * var)


def rbf_matrix(X, Y, config: RbfConfig) -> KernelMatrix:
    symmetric = X is Y
    X, Y = _as_matrix(X), _as_matrix(Y)
    _check_dims(X, Y)
    sq = np.sum(X ** 2, axis=1)[:, None] + np.sum(Y ** 2, axis=1)[None, :] - 2.0 * X @ Y.T
    np.maximum(sq, 0.0, out=sq)
    if symmetric:
        np.fill_diagonal(sq, 0.0)
    values = np.exp(-config.gamma * sq)
    if symmetric:
        values = _mirror_upper(values)
    meta = {"gamma": config.gamma, **_counts_meta(X.shape[0], Y.shape[0], symmetric)}
    return KernelMatrix(values, KernelMethod.RBF, meta, KernelContext(gamma=config.gamma))


# ---------------- exact fidelity ---------------------------------------------

def _upper_fidelities(states: np.ndarray, block_rows: int) -> np.ndarray:
    """|<psi_i|psi_j>|^2 for j >= i only, one row block at a time, mirrored below."""
    n = states.shape[0]
    out = np.empty((n, n))
    for start in range(0, n, block_rows):
        stop = min(start + block_rows, n)
        f = np.abs(states[start:stop].conj() @ states[start:].T) ** 2
        square = f[:, :stop - start]
        f[:, :stop - start] = np.triu(square) + np.triu(square, 1).T
        out[start:stop, start:] = f
        out[start:, start:stop] = f.T
    return out


def fidelity_exact_matrix(X, Y, fmap: FeatureMapConfig, block_rows: int = DEFAULT_BLOCK_ROWS) -> KernelMatrix:
    symmetric = X is Y
    X, Y = _as_matrix(X), _as_matrix(Y)
    _check_dims(X, Y, fmap.n_qubits)
    sx = qsim.feature_map_states(fmap, X)
    if symmetric:
        values = _upper_fidelities(sx, block_rows)
    else:
        values = np.abs(sx.conj() @ qsim.feature_map_states(fmap, Y).T) ** 2
    values = np.clip(values, 0.0, 1.0)
    meta = {"feature_map": fmap.to_record(), **_counts_meta(X.shape[0], Y.shape[0], symmetric)}
    return KernelMatrix(values, KernelMethod.FIDELITY_EXACT, meta)


# ---------------- shot-sampled tests -----------------------------------------

def _binomial_counts(u: np.ndarray, shots: int, p: np.ndarray) -> np.ndarray:
    """Inverse-CDF binomial draw, one keyed uniform per entry."""
    counts = np.where(p >= 1.0, float(shots), 0.0)
    interior = (p > 0.0) & (p < 1.0)
    if np.any(interior):
        counts[interior] = binom.ppf(u[interior], shots, p[interior])
    return counts


def _sampled_matrix(X, Y, fmap, shots, seed, stream, transform, block_rows) -> np.ndarray:
    """
    Shared loop of the analytic inversion and swap tests: exact overlap per
    entry, `transform` maps fidelity to the success probability, then a keyed
    binomial draw of `shots` outcomes.
    """
    symmetric = X is Y
    X, Y = _as_matrix(X), _as_matrix(Y)
    sx = qsim.feature_map_states(fmap, X)
    sy = sx if symmetric else qsim.feature_map_states(fmap, Y)
    n, m = X.shape[0], Y.shape[0]
    freq = np.zeros((n, m))
    for start in range(0, n, block_rows):
        stop = min(n, start + block_rows)
        block = sx[start:stop] @ sy.conj().T
        if symmetric:
            local, cols = np.nonzero(np.arange(m)[None, :] >= np.arange(start, stop)[:, None])
        else:
            local, cols = np.indices(block.shape).reshape(2, -1)
        rows = local + start
        f = np.clip(np.abs(block[local, cols]) ** 2, 0.0, 1.0)
        u = seeding.entry_uniforms(seed, stream, rows, cols)
        freq[rows, cols] = _binomial_counts(u, shots, transform(f)) / shots
    if symmetric:
        freq = _mirror_upper(freq)
    return freq


def _check_shots(shots: int):
    if shots < 1:
        raise ConfigError(f"shots must be >= 1, got {shots}")


def inversion_test_matrix(X, Y, fmap: FeatureMapConfig, shots: int, seed: int,
                          circuit: str = "analytic", block_rows: int = DEFAULT_BLOCK_ROWS) -> KernelMatrix:
    """
    Frequency of the all-zeros outcome of U(y_j)^dagger U(x_i)|0>.

    "analytic" reads the all-zeros amplitude <Phi(y)|Phi(x)> and draws the
    count binomially; "full" builds the circuit state and samples bitstrings.
    """
    _check_shots(shots)
    symmetric = X is Y
    Xm, Ym = _as_matrix(X), _as_matrix(Y)
    _check_dims(Xm, Ym, fmap.n_qubits)
    if circuit == "analytic":
        values = _sampled_matrix(X, Y, fmap, shots, seed, seeding.STREAM_INVERSION, lambda f: f, block_rows)
    elif circuit == "full":
        values = _inversion_full(Xm, Ym, fmap, shots, seed, symmetric)
    else:
        raise ConfigError(f"unknown inversion circuit mode {circuit!r}")
    meta = {
        "shots": shots, "seed": seed, "circuit": circuit, "feature_map": fmap.to_record(),
        **_counts_meta(Xm.shape[0], Ym.shape[0], symmetric),
    }
    meta["total_shots"] = meta["evaluations"] * shots
    return KernelMatrix(values, KernelMethod.INVERSION, meta)


def _inversion_full(X, Y, fmap, shots, seed, symmetric) -> np.ndarray:
    d = fmap.n_qubits
    zeros = "0" * d
    inverses = [qsim.inverse_gates(qsim.feature_map_gates(fmap, y)) for y in Y]
    values = np.zeros((X.shape[0], Y.shape[0]))
    for i, x in enumerate(X):
        prepared = qsim.apply_feature_map(fmap, x)
        for j in range(i if symmetric else 0, Y.shape[0]):
            state = qsim.apply_gates(prepared, inverses[j])
            rng = seeding.keyed_rng(seed, seeding.STREAM_INVERSION, i, j)
            values[i, j] = qsim.sample_bitstrings(state, shots, rng).get(zeros, 0) / shots
    return _mirror_upper(values) if symmetric else values


def swap_test_matrix(X, Y, fmap: FeatureMapConfig, shots: int, seed: int,
                     circuit: str = "analytic", block_rows: int = DEFAULT_BLOCK_ROWS) -> KernelMatrix:
    """
    2 * P(ancilla = 0) - 1, clamped to [0, 1].

    "analytic" uses P(0) = (1 + F) / 2 with a binomial draw; "full" (d <= 4)
    simulates the (2d+1)-qubit controlled-swap circuit.
    """
    _check_shots(shots)
    symmetric = X is Y
    Xm, Ym = _as_matrix(X), _as_matrix(Y)
    _check_dims(Xm, Ym, fmap.n_qubits)
    if circuit == "analytic":
        p0 = _sampled_matrix(X, Y, fmap, shots, seed, seeding.STREAM_SWAP, lambda f: 0.5 * (1.0 + f), block_rows)
    elif circuit == "full":
        if fmap.n_qubits > SWAP_FULL_MAX_QUBITS:
            raise CapacityError(f"full swap-test circuit limited to {SWAP_FULL_MAX_QUBITS} qubits per register")
        p0 = _swap_full(Xm, Ym, fmap, shots, seed, symmetric)
    else:
        raise ConfigError(f"unknown swap circuit mode {circuit!r}")
    values = np.clip(2.0 * p0 - 1.0, 0.0, 1.0)
    meta = {
        "shots": shots, "seed": seed, "circuit": circuit, "feature_map": fmap.to_record(),
        **_counts_meta(Xm.shape[0], Ym.shape[0], symmetric),
    }
    meta["total_shots"] = meta["evaluations"] * shots
    return KernelMatrix(values, KernelMethod.SWAP, meta)


def _controlled_swap_permutation(d: int) -> np.ndarray:
    # layout: register A on qubits 0..d-1, register B on d..2d-1, ancilla on 2d
    idx = np.arange(2 ** (2 * d + 1))
    mask = 2 ** d - 1
    a, b, anc = idx & mask, (idx >> d) & mask, idx >> (2 * d)
    swapped = (anc << (2 * d)) | (a << d) | b
    return np.where(anc == 1, swapped, idx)


def _swap_full(X, Y, fmap, shots, seed, symmetric) -> np.ndarray:
    d = fmap.n_qubits
    n_total = 2 * d + 1
    perm = _controlled_swap_permutation(d)
    sx = qsim.feature_map_states(fmap, X)
    sy = sx if symmetric else qsim.feature_map_states(fmap, Y)
    ancilla0 = np.array([1.0, 0.0], dtype=np.complex128)
    p0 = np.zeros((X.shape[0], Y.shape[0]))
    for i in range(X.shape[0]):
        for j in range(i if symmetric else 0, Y.shape[0]):
            amps = np.kron(ancilla0, np.kron(sy[j], sx[i]))
            amps = qsim._apply_1q(amps, qsim.H_MATRIX, 2 * d, n_total)
            amps = amps[perm]
            amps = qsim._apply_1q(amps, qsim.H_MATRIX, 2 * d, n_total)
            rng = seeding.keyed_rng(seed, seeding.STREAM_SWAP, i, j)
            counts = qsim.sample_bitstrings(qsim.Statevector(n_total, amps), shots, rng)
            p0[i, j] = sum(c for bits, c in counts.items() if bits[0] == "0") / shots
    return _mirror_upper(p0) if symmetric else p0


# ---------------- randomized measurements ------------------------------------

def rm_profile(X, fmap: FeatureMapConfig, r: int, shots: int, seed: int,
               exact_probabilities: bool = False,
               settings: Optional[Sequence[LocalUnitarySetting]] = None) -> ProbabilityTable:
    """
    Outcome distributions of every point under r shared local-Haar settings.

    Pass `settings` (typically `train_profile.settings`) to measure new points
    in the bases of an existing table.
    """
    X = _as_matrix(X)
    d = fmap.n_qubits
    if d > RM_MAX_QUBITS:
        raise CapacityError(f"randomized-measurement post-processing limited to {RM_MAX_QUBITS} qubits, got {d}")
    _check_dims(X, X, d)
    if settings is None:
        if r < 2:
            raise ConfigError(f"randomized measurements need r >= 2 settings, got {r}")
        rng = seeding.keyed_rng(seed, seeding.STREAM_HAAR)
        settings = [qsim.sample_haar_local(d, rng) for _ in range(r)]
    elif not isinstance(settings, list):
        settings = list(settings)
    r = len(settings)
    if not exact_probabilities:
        _check_shots(shots)

    states = qsim.feature_map_states(fmap, X)
    probs = np.empty((X.shape[0], r, 2 ** d))
    for u, setting in enumerate(settings):
        probs[:, u, :] = np.abs(qsim.rotate_amplitudes(states, setting)) ** 2
    probs /= probs.sum(axis=2, keepdims=True)

    if not exact_probabilities:
        for i in range(X.shape[0]):
            rng_i = seeding.keyed_rng(seed, seeding.STREAM_RM_SHOTS, i)
            probs[i] = rng_i.multinomial(shots, probs[i]) / shots
    logger.debug("rm_profile: %d points x %d settings on %d qubits", X.shape[0], r, d)
    return ProbabilityTable(
        n_points=X.shape[0], n_qubits=d, r=r, probs=probs, settings=settings,
        shots=None if exact_probabilities else shots, seed=seed,
    )


def hamming_weight_matrix(d: int) -> np.ndarray:
    """W[s, s'] = (-2)^(-Hamming(s, s')), built as a d-fold tensor power."""
    w1 = np.array([[1.0, -0.5], [-0.5, 1.0]])
    w = np.ones((1, 1))
    for _ in range(d):
        w = np.kron(w, w1)
    return w


def _same_settings(P: ProbabilityTable, Q: ProbabilityTable) -> bool:
    if P.settings is Q.settings:
        return True
    if len(P.settings) != len(Q.settings):
        return False
    return all(a is b or np.array_equal(a.per_qubit, b.per_qubit) for a, b in zip(P.settings, Q.settings))


def rm_kernel(P: ProbabilityTable, Q: ProbabilityTable) -> KernelMatrix:
    if P.n_qubits != Q.n_qubits or not _same_settings(P, Q):
        raise SettingsMismatchError("probability tables were measured under different settings")
    d, r = P.n_qubits, P.r
    dim = 2 ** d
    w = hamming_weight_matrix(d)
    left = (P.probs @ w).reshape(P.n_points, r * dim)
    right = Q.probs.reshape(Q.n_points, r * dim)
    values = (dim / r) * (left @ right.T)
    symmetric = P is Q
    if symmetric:
        values = _mirror_upper(values)
    meta = {"r": r, "shots": P.shots, "seed": P.seed, **_counts_meta(P.n_points, Q.n_points, symmetric)}
    return KernelMatrix(values, KernelMethod.RANDOMIZED, meta)


def estimate_purities(P: ProbabilityTable) -> ProbabilityTable:
    """Fill P.purity with the diagonal of rm_kernel(P, P); values above 1 are kept."""
    P.purity = np.diag(rm_kernel(P, P).values).copy()
    return P


def mitigate(K: KernelMatrix, purities_left, purities_right) -> KernelMatrix:
    pl = np.asarray(purities_left, dtype=float)
    pr = np.asarray(purities_right, dtype=float)
    if pl.shape != (K.shape[0],) or pr.shape != (K.shape[1],):
        raise DimensionError(f"purity vectors {pl.shape}/{pr.shape} do not match kernel {K.shape}")
    if np.any(pl <= 0.0) or np.any(pr <= 0.0):
        raise MitigationError("purity estimates must be positive to mitigate")
    values = K.values / np.sqrt(np.outer(pl, pr))
    return replace(K, values=values, method=KernelMethod.RANDOMIZED_MITIGATED, meta={**K.meta, "mitigated": True})


def rm_expected_error(s: int, r: int) -> float:
    if s < 1 or r < 1:
        raise ConfigError(f"s and r must be >= 1, got s={s}, r={r}")
    return 1.0 / (s * math.sqrt(r))


# ---------------- backends ---------------------------------------------------

@dataclass
class KernelBackend:
    """
    A kernel method with its parameters, exposing the two callables models
    and ensembles consume: train(X, seed) and cross(X_test, X_train, context, seed).
    """
    method: KernelMethod
    fmap: Optional[FeatureMapConfig] = None
    shots: int = 1000
    r: int = 30
    rm_shots: int = 9000
    gamma: Union[str, float] = "scale"
    inversion_circuit: str = "analytic"
    swap_circuit: str = "analytic"

    def __post_init__(self):
        self.method = KernelMethod(self.method)
        if self.method != KernelMethod.RBF and self.fmap is None:
            raise ConfigError(f"kernel method {self.method.value} needs a feature map")

    @property
    def randomized(self) -> bool:
        return self.method in (KernelMethod.RANDOMIZED, KernelMethod.RANDOMIZED_MITIGATED)

    def _pair(self, A, B, seed: int) -> KernelMatrix:
        if self.method == KernelMethod.FIDELITY_EXACT:
            return fidelity_exact_matrix(A, B, self.fmap)
        if self.method == KernelMethod.INVERSION:
            return inversion_test_matrix(A, B, self.fmap, self.shots, seed, circuit=self.inversion_circuit)
        if self.method == KernelMethod.SWAP:
            return swap_test_matrix(A, B, self.fmap, self.shots, seed, circuit=self.swap_circuit)
        raise ConfigError(f"no pairwise evaluation for {self.method.value}")

    def train(self, X, seed: int) -> KernelMatrix:
        if self.method == KernelMethod.RBF:
            gamma = gamma_scale(X) if self.gamma == "scale" else float(self.gamma)
            return rbf_matrix(X, X, RbfConfig(gamma))
        if self.randomized:
            P = rm_profile(X, self.fmap, self.r, self.rm_shots, seed)
            K = rm_kernel(P, P)
            P.purity = np.diag(K.values).copy()
            if self.method == KernelMethod.RANDOMIZED_MITIGATED:
                K = mitigate(K, P.purity, P.purity)
            K.meta["total_shots"] = P.total_shots
            K.context = KernelContext(profile=P)
            return K
        return self._pair(X, X, seed)

    def context_for(self, X_train, seed: int) -> KernelContext:
        """Rebuild the context `train` attaches, without the training matrix."""
        if self.method == KernelMethod.RBF:
            return KernelContext(gamma=gamma_scale(X_train) if self.gamma == "scale" else float(self.gamma))
        if self.randomized:
            return KernelContext(profile=estimate_purities(rm_profile(X_train, self.fmap, self.r, self.rm_shots, seed)))
        return KernelContext()

    def to_record(self) -> dict:
        return {
            "method": self.method.value,
            "feature_map": None if self.fmap is None else self.fmap.to_record(),
            "shots": self.shots,
            "r": self.r,
            "rm_shots": self.rm_shots,
            "gamma": self.gamma,
            "inversion_circuit": self.inversion_circuit,
            "swap_circuit": self.swap_circuit,
        }

    @classmethod
    def from_record(cls, record: dict) -> "KernelBackend":
        fmap = record.get("feature_map")
        return cls(
            method=KernelMethod(record["method"]),
            fmap=None if fmap is None else FeatureMapConfig(**fmap),
            shots=int(record.get("shots", 1000)),
            r=int(record.get("r", 30)),
            rm_shots=int(record.get("rm_shots", 9000)),
            gamma=record.get("gamma", "scale"),
            inversion_circuit=record.get("inversion_circuit", "analytic"),
            swap_circuit=record.get("swap_circuit", "analytic"),
        )

    def cross(self, X_test, X_train, context: KernelContext, seed: int) -> KernelMatrix:
        if self.method == KernelMethod.RBF:
            return rbf_matrix(X_test, X_train, RbfConfig(context.gamma))
        if self.randomized:
            P = context.profile
            Q = rm_profile(X_test, self.fmap, P.r, self.rm_shots, seed, settings=P.settings)
            K = rm_kernel(Q, P)
            if self.method == KernelMethod.RANDOMIZED_MITIGATED:
                estimate_purities(Q)
                K = mitigate(K, Q.purity, P.purity)
            K.meta["total_shots"] = Q.total_shots
            return K
        return self._pair(X_test, X_train, seed)
