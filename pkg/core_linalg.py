"""
Dense Linear Algebra Kernel

Rank-revealing numerics shared by every analysis in the toolkit. All rank
decisions go through singular-value thresholding and report the threshold
they used, so every verdict built on top of them can be audited.

Key Features:
- SVD rank with explicit, reported tolerance (absolute, relative or env override)
- Orthonormal null-space and row-space bases
- Subspace equality with projection residuals
- Matrix exponential (scaling-and-squaring Pade via scipy) and integer powers
- Eigenvalue clustering with index computation by rank stabilisation
- Least squares through an orthogonal (QR) factorisation
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

import obsvkit_config as config
from obsvkit_errors import (
    InvalidBasis,
    InvalidExponent,
    InvalidMatrix,
    NumericalInconsistency,
    RankDeficientRegressor,
)

logger = logging.getLogger(__name__)

EPS = np.finfo(float).eps


@dataclass(frozen=True)
class RankResult:
    """Outcome of a numerical rank evaluation."""

    rank: int
    singular_values: Tuple[float, ...]
    tolerance_used: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "rank": int(self.rank),
            "singular_values": [float(s) for s in self.singular_values],
            "tolerance": float(self.tolerance_used),
        }


@dataclass(frozen=True)
class EigenStructure:
    """Distinct eigenvalues with multiplicities and indices."""

    distinct_eigenvalues: Tuple[complex, ...]
    algebraic_multiplicities: Tuple[int, ...]
    geometric_multiplicities: Tuple[int, ...]
    indices: Tuple[int, ...]
    cluster_tol: float
    warnings: Tuple[str, ...] = field(default_factory=tuple)

    @property
    def v(self) -> int:
        return len(self.distinct_eigenvalues)

    @property
    def d(self) -> int:
        return int(sum(self.indices))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "eigenvalues": [[float(np.real(lam)), float(np.imag(lam))] for lam in self.distinct_eigenvalues],
            "algebraic_multiplicities": list(self.algebraic_multiplicities),
            "geometric_multiplicities": list(self.geometric_multiplicities),
            "indices": list(self.indices),
            "v": self.v,
            "d": self.d,
            "cluster_tol": float(self.cluster_tol),
            "warnings": list(self.warnings),
        }


# ---------------------------------------------------------------------------
# Validation helpers
# ---------------------------------------------------------------------------

def as_matrix(M: Any, name: str = "matrix") -> np.ndarray:
    """
    Convert input to a finite 2-D array (1-D input becomes a single row).

    Raises:
        InvalidMatrix: if the input is not numeric, not 2-D or has NaN/Inf entries
    """
    try:
        arr = np.asarray(M)
    except Exception as e:
        raise InvalidMatrix(f"{name}: cannot convert to array ({e})")
    if arr.dtype == object or not (np.issubdtype(arr.dtype, np.number) or arr.dtype == bool):
        raise InvalidMatrix(f"{name}: entries must be numeric")
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise InvalidMatrix(f"{name}: expected a 2-D matrix, got {arr.ndim} dimensions")
    if not np.issubdtype(arr.dtype, np.complexfloating):
        arr = arr.astype(float)
    if arr.size and not np.all(np.isfinite(arr)):
        raise InvalidMatrix(f"{name}: entries must be finite")
    return arr


def as_square(A: Any, name: str = "A") -> np.ndarray:
    arr = as_matrix(A, name)
    if arr.shape[0] != arr.shape[1]:
        raise InvalidMatrix(f"{name}: expected a square matrix, got {arr.shape[0]}x{arr.shape[1]}")
    return arr


def real_if_close(M: np.ndarray, tol: float = config.DEFAULT_IMAG_RESIDUE) -> np.ndarray:
    """
    Drop the imaginary part of a result that must be real.

    Raises:
        NumericalInconsistency: if the imaginary residue exceeds tol (relative)
    """
    M = np.asarray(M)
    if not np.iscomplexobj(M):
        return M
    scale = max(1.0, float(np.max(np.abs(M)))) if M.size else 1.0
    residue = float(np.max(np.abs(M.imag))) if M.size else 0.0
    if residue > tol * scale:
        raise NumericalInconsistency(f"expected a real result, imaginary residue {residue:.3e}")
    return np.ascontiguousarray(M.real)


def vstack(blocks: Sequence[np.ndarray], cols: int) -> np.ndarray:
    """Stack row blocks; an empty list gives a 0 x cols matrix."""
    blocks = [np.atleast_2d(b) for b in blocks if np.asarray(b).size]
    if not blocks:
        return np.zeros((0, cols))
    return np.vstack(blocks)


# ---------------------------------------------------------------------------
# Rank and subspaces
# ---------------------------------------------------------------------------

def _threshold(s: np.ndarray, shape: Tuple[int, int], tol: Optional[float], rtol: Optional[float]) -> float:
    if tol is not None:
        if not tol > 0:
            raise ValueError("tol must be positive")
        return float(tol)
    if rtol is None:
        rtol = config.rank_rtol_override()
    if rtol is None:
        rtol = max(shape) * EPS
    if not rtol > 0:
        raise ValueError("rtol must be positive")
    smax = float(s[0]) if s.size else 0.0
    return float(rtol * smax) if smax > 0 else float(rtol)


def _svd(M: np.ndarray, compute_uv: bool):
    try:
        return scipy.linalg.svd(M, full_matrices=True, compute_uv=compute_uv)
    except np.linalg.LinAlgError:
        # gesdd occasionally fails to converge; gesvd is slower but robust
        return scipy.linalg.svd(M, full_matrices=True, compute_uv=compute_uv, lapack_driver="gesvd")


def rank_of(M: Any, tol: Optional[float] = None, rtol: Optional[float] = None) -> RankResult:
    """
    Numerical rank by singular-value thresholding.

    The threshold is tol when given, otherwise rtol * sigma_max, with rtol
    taken from OBSVKIT_TOL or max(rows, cols) * machine epsilon.

    Raises:
        InvalidMatrix: non-finite or non-numeric entries
    """
    M = as_matrix(M)
    if M.size == 0:
        return RankResult(0, (), float(tol) if tol else float(rtol or EPS))
    s = _svd(M, compute_uv=False)
    threshold = _threshold(s, M.shape, tol, rtol)
    rank = int(np.sum(s > threshold))
    return RankResult(rank, tuple(float(x) for x in s), threshold)


def orthonormal_bases(M: Any, tol: Optional[float] = None,
                      rtol: Optional[float] = None) -> Tuple[RankResult, np.ndarray, np.ndarray]:
    """
    Rank plus orthonormal bases of the row space and right null space.

    Returns:
        (rank_result, row_basis n x r, null_basis n x (n - r))
    """
    M = as_matrix(M)
    n = M.shape[1]
    if M.shape[0] == 0 or n == 0:
        eye = np.eye(n, dtype=M.dtype)
        return RankResult(0, (), float(tol) if tol else float(rtol or EPS)), eye[:, :0], eye
    _, s, vh = _svd(M, compute_uv=True)
    threshold = _threshold(s, M.shape, tol, rtol)
    r = int(np.sum(s > threshold))
    V = vh.conj().T
    return RankResult(r, tuple(float(x) for x in s), threshold), V[:, :r], V[:, r:]


def null_space_basis(M: Any, tol: Optional[float] = None, rtol: Optional[float] = None) -> np.ndarray:
    """Orthonormal basis (columns) of the right null space of M."""
    _, _, null = orthonormal_bases(M, tol=tol, rtol=rtol)
    return null


def _check_orthonormal(B: np.ndarray, name: str) -> None:
    if B.shape[1] == 0:
        return
    gram = B.conj().T @ B
    err = float(np.max(np.abs(gram - np.eye(B.shape[1]))))
    if err > config.DEFAULT_ORTHONORMAL_TOL:
        raise InvalidBasis(f"{name}: columns are not orthonormal (max Gram error {err:.2e})")


def subspaces_equal(B1: Any, B2: Any, tol: float = 1e-8) -> bool:
    """
    True iff the orthonormal bases B1 and B2 span the same subspace.

    Raises:
        InvalidBasis: a basis has non-orthonormal columns
        InvalidMatrix: row counts differ
    """
    B1 = as_matrix(B1, "B1")
    B2 = as_matrix(B2, "B2")
    if B1.shape[0] != B2.shape[0]:
        raise InvalidMatrix(f"bases live in different spaces ({B1.shape[0]} vs {B2.shape[0]} rows)")
    _check_orthonormal(B1, "B1")
    _check_orthonormal(B2, "B2")
    if B1.shape[1] != B2.shape[1]:
        return False
    if B1.shape[1] == 0:
        return True
    res12 = B1 - B2 @ (B2.conj().T @ B1)
    res21 = B2 - B1 @ (B1.conj().T @ B2)
    worst = max(float(np.max(np.linalg.norm(res12, axis=0))), float(np.max(np.linalg.norm(res21, axis=0))))
    return worst < tol


# ---------------------------------------------------------------------------
# Matrix functions
# ---------------------------------------------------------------------------

def matrix_exponential(A: Any, t: float) -> np.ndarray:
    """e^{At} via scipy's scaling-and-squaring Pade algorithm."""
    A = as_square(A)
    if np.iscomplexobj(A):
        A = real_if_close(A)
    t = float(t)
    if not np.isfinite(t):
        raise InvalidMatrix("time must be finite")
    if A.shape[0] == 0:
        return np.zeros((0, 0))
    return scipy.linalg.expm(A * t)


def _as_exponent(t: Any) -> int:
    if isinstance(t, (bool, np.bool_)):
        raise InvalidExponent("exponent must be an integer, got a boolean")
    if isinstance(t, (int, np.integer)):
        value = int(t)
    else:
        try:
            f = float(t)
        except (TypeError, ValueError):
            raise InvalidExponent(f"exponent must be an integer, got {t!r}")
        if not np.isfinite(f) or f != int(f):
            raise InvalidExponent(f"exponent must be an integer, got {t!r}")
        value = int(f)
    if value < 0:
        raise InvalidExponent(f"exponent must be non-negative, got {value}")
    return value


def matrix_power(A: Any, t: Any) -> np.ndarray:
    """A^t by binary exponentiation; A^0 is the identity."""
    A = as_square(A)
    k = _as_exponent(t)
    if A.shape[0] == 0:
        return np.zeros((0, 0))
    return np.linalg.matrix_power(A, k)


# ---------------------------------------------------------------------------
# Eigenstructure
# ---------------------------------------------------------------------------

def _cluster(values: np.ndarray, tol: float) -> List[List[int]]:
    """Single-linkage clusters of eigenvalues closer than tol."""
    n = len(values)
    parent = list(range(n))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if abs(values[i] - values[j]) <= tol:
                parent[find(i)] = find(j)
    groups: Dict[int, List[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return list(groups.values())


def _power_ranks(N: np.ndarray, max_power: int, cluster_tol: float) -> List[int]:
    """Ranks of N, N^2, ..., N^max_power (one extra power to detect stationarity)."""
    ranks = []
    P = np.eye(N.shape[0], dtype=N.dtype)
    norm_n = max(1.0, float(np.linalg.norm(N, 2)))
    for k in range(1, max_power + 2):
        P = P @ N
        # eigenvalue error of order cluster_tol leaves residual singular values of that size
        floor = 10.0 * cluster_tol * norm_n ** (k - 1)
        s = _svd(P, compute_uv=False) if P.size else np.zeros(0)
        default = max(P.shape) * EPS * (float(s[0]) if s.size else 0.0)
        ranks.append(int(np.sum(s > max(default, floor))))
    return ranks


def eigenstructure(A: Any, cluster_tol: Optional[float] = None) -> EigenStructure:
    """
    Distinct eigenvalues with algebraic/geometric multiplicities and indices.

    Eigenvalues within cluster_tol (default 1e-8 * ||A||_2) are merged. The
    index d_i is the smallest k at which rank((A - lambda_i I)^k) stops
    decreasing. Clusters closer than 2 * cluster_tol that were not merged
    produce an AmbiguousSpectrum warning on the result.
    """
    A = as_square(A)
    n = A.shape[0]
    norm_a = float(np.linalg.norm(A, 2)) if n else 0.0
    if cluster_tol is None:
        cluster_tol = config.DEFAULT_CLUSTER_TOL_FACTOR * (norm_a if norm_a > 0 else 1.0)
    if not cluster_tol > 0:
        raise ValueError("cluster_tol must be positive")
    if n == 0:
        return EigenStructure((), (), (), (), float(cluster_tol))

    eigvals = scipy.linalg.eigvals(A)
    groups = _cluster(eigvals, cluster_tol)
    centers = [complex(np.mean(eigvals[g])) for g in groups]

    warnings: List[str] = []
    for a in range(len(groups)):
        for b in range(a + 1, len(groups)):
            gap = min(abs(eigvals[i] - eigvals[j]) for i in groups[a] for j in groups[b])
            if gap <= 2 * cluster_tol:
                message = (f"AmbiguousSpectrum: eigenvalue clusters near {centers[a]:.6g} and "
                           f"{centers[b]:.6g} are {gap:.2e} apart (cluster_tol {cluster_tol:.2e})")
                warnings.append(message)
                logger.warning(message)

    # snap clusters that straddle the real axis onto it
    centers = [complex(c.real, 0.0) if abs(c.imag) <= cluster_tol else c for c in centers]
    order = sorted(range(len(groups)), key=lambda i: (-centers[i].real, centers[i].imag))

    distinct, alg, geo, idx = [], [], [], []
    for i in order:
        lam = centers[i]
        m = len(groups[i])
        N = A - lam * np.eye(n)
        ranks = _power_ranks(N, m, cluster_tol)
        d_i = m
        for k in range(m):
            if ranks[k] == ranks[k + 1]:
                d_i = k + 1
                break
        distinct.append(lam)
        alg.append(m)
        geo.append(max(1, min(m, n - ranks[0])))
        idx.append(max(1, min(d_i, m)))

    return EigenStructure(tuple(distinct), tuple(alg), tuple(geo), tuple(idx), float(cluster_tol), tuple(warnings))


# ---------------------------------------------------------------------------
# Least squares
# ---------------------------------------------------------------------------

def solve_least_squares(Phi: Any, Y: Any, tol: Optional[float] = None,
                        rtol: Optional[float] = None) -> np.ndarray:
    """
    Minimiser of ||Phi x - Y||^2 through an economic QR factorisation.

    Raises:
        RankDeficientRegressor: Phi lacks full column rank (carries the RankResult)
    """
    Phi = as_matrix(Phi, "Phi")
    Y_arr = np.asarray(Y, dtype=Phi.dtype if np.iscomplexobj(Phi) else None)
    if Y_arr.ndim == 0:
        Y_arr = Y_arr.reshape(1)
    if Y_arr.shape[0] != Phi.shape[0]:
        raise InvalidMatrix(f"Y has {Y_arr.shape[0]} rows but Phi has {Phi.shape[0]}")
    if Y_arr.size and not np.all(np.isfinite(Y_arr)):
        raise InvalidMatrix("Y: entries must be finite")
    cols = Phi.shape[1]
    if cols == 0:
        return np.zeros((0,) + Y_arr.shape[1:])
    rank = rank_of(Phi, tol=tol, rtol=rtol)
    if rank.rank < cols:
        raise RankDeficientRegressor(
            f"regressor has rank {rank.rank} < {cols} columns", rank_result=rank)
    Q, R = scipy.linalg.qr(Phi, mode="economic")
    return scipy.linalg.solve_triangular(R, Q.conj().T @ Y_arr)
