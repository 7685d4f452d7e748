"""
Observability Matrices and Canonical Decomposition

Classical observability matrix O(A, C), its sample-based counterpart O_s
evaluated at the measurement instants, the observable canonical
decomposition and the guarantee that a schedule which keeps the observable
block observable also preserves null(O(A, C)).

Key Features:
- O(A, C) and O_s(A, C) for discrete (A^t) and continuous (e^{At}) systems
- Orthogonal decomposition P_o with the observable block first
- Observability index by incremental rank growth
- Null-space guarantee check with independent hypothesis/conclusion flags
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, Optional, Sequence

import numpy as np

import core_linalg as la
from core_linalg import RankResult
from obsvkit_errors import InvalidMatrix, NotObservable, NumericalInconsistency
from system_model import LtiSystem, SamplingSequence, check_domain

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ObservableDecomposition:
    """
    A_o = P_o^T A P_o = [[A_ob, 0], [A_21, A_unob]], C_o = C P_o = [C_ob, 0].

    P_o is orthogonal, so its inverse is its transpose.
    """

    P_o: np.ndarray
    A_o: np.ndarray
    C_o: np.ndarray
    A_ob: np.ndarray
    C_ob: np.ndarray
    p: int
    observability_index: int
    rank_result: RankResult

    @property
    def n(self) -> int:
        return self.P_o.shape[0]

    @property
    def n_ob(self) -> int:
        return self.n - self.p

    @property
    def T_ob(self) -> np.ndarray:
        """Columns of P_o spanning the observable coordinates (n x (n - p))."""
        return self.P_o[:, :self.n_ob]

    def restrict(self, M: np.ndarray) -> np.ndarray:
        """(M P_o)_ob: the observable-coordinate block of M P_o."""
        return np.atleast_2d(np.asarray(M, dtype=float)) @ self.T_ob

    def to_observable(self, x: np.ndarray) -> np.ndarray:
        """Observable coordinates of a state (first n - p entries of P_o^{-1} x)."""
        return self.T_ob.T @ np.asarray(x, dtype=float)

    def summary(self) -> Dict[str, Any]:
        return {
            "n": self.n,
            "p": self.p,
            "n_ob": self.n_ob,
            "observability_index": self.observability_index,
            "rank": self.rank_result.to_dict(),
        }


@dataclass(frozen=True)
class NullSpaceReport:
    """Whether a schedule keeps the observable block observable, and whether null(O_s) = null(O)."""

    hypothesis_holds: bool
    conclusion_holds: bool
    observable_block_rank: RankResult
    n_ob: int
    sampled_rank: RankResult
    classical_rank: RankResult

    def to_dict(self) -> Dict[str, Any]:
        return {
            "hypothesis_holds": self.hypothesis_holds,
            "conclusion_holds": self.conclusion_holds,
            "n_minus_p": self.n_ob,
            "observable_block_sampled_rank": self.observable_block_rank.to_dict(),
            "sampled_rank": self.sampled_rank.to_dict(),
            "classical_rank": self.classical_rank.to_dict(),
        }


def _pair(A: Any, C: Any) -> tuple:
    A = la.as_square(A, "A")
    C = np.asarray(C, dtype=float)
    if C.ndim == 1:
        C = C.reshape(1, -1) if C.size else C.reshape(0, A.shape[0])
    C = la.as_matrix(C, "C")
    if C.shape[1] != A.shape[0]:
        raise InvalidMatrix(f"C has {C.shape[1]} columns but A is {A.shape[0]}x{A.shape[0]}")
    return A, C


def transition(A: np.ndarray, t: float, discrete: bool) -> np.ndarray:
    """State transition over t: A^t in discrete time, e^{At} in continuous time."""
    return la.matrix_power(A, t) if discrete else la.matrix_exponential(A, t)


def observability_matrix(A: Any, C: Any) -> np.ndarray:
    """
    Stack (C; CA; ...; CA^{n-1}).

    Raises:
        InvalidMatrix: dimension mismatch
    """
    A, C = _pair(A, C)
    n = A.shape[0]
    blocks = []
    row = C
    for _ in range(n):
        blocks.append(row)
        row = row @ A
    return np.vstack(blocks) if blocks else np.zeros((0, 0))


def sampled_matrix(A: Any, C_like: Any, times: Sequence[float], discrete: bool) -> np.ndarray:
    """Stack C_like * Psi(t_i) over the instants, in the given order."""
    A, C_like = _pair(A, C_like)
    n = A.shape[0]
    if len(times) == 0 or C_like.shape[0] == 0:
        return np.zeros((0, n))
    blocks = []
    if discrete:
        # consecutive powers: A^{t_i} = A^{t_{i-1}} A^{t_i - t_{i-1}}
        previous, power = 0, np.eye(n)
        for t in times:
            t = int(t)
            if t >= previous:
                power = power @ la.matrix_power(A, t - previous)
            else:
                power = la.matrix_power(A, t)
            previous = t
            blocks.append(C_like @ power)
    else:
        for t in times:
            blocks.append(C_like @ la.matrix_exponential(A, t))
    return np.vstack(blocks)


def sampled_observability_matrix(sys: LtiSystem, C_like: Any, seq: SamplingSequence) -> np.ndarray:
    """
    O_s(A, C_like): C_like e^{A t_i} (continuous) or C_like A^{t_i} (discrete), stacked.

    Raises:
        DomainMismatch: schedule and system are in different time domains
    """
    check_domain(sys, seq)
    return sampled_matrix(sys.A, C_like, seq.times, sys.is_discrete)


def is_sample_based_observable(sys: LtiSystem, seq: SamplingSequence,
                               tol: Optional[float] = None) -> tuple:
    """
    True iff O_s(A, C) has full column rank.

    Returns:
        (verdict, RankResult)
    """
    rank = la.rank_of(sampled_observability_matrix(sys, sys.C, seq), tol=tol)
    return rank.rank == sys.n, rank


def observability_index(A: Any, C: Any, tol: Optional[float] = None) -> int:
    """
    Smallest nu with rank(C; CA; ...; CA^{nu-1}) = n. An empty pair (n = 0) has index 0.

    Raises:
        NotObservable: the pair is not observable
    """
    if np.asarray(A).size == 0:
        return 0
    A, C = _pair(A, C)
    n = A.shape[0]
    stack = np.zeros((0, n))
    row = C
    for nu in range(1, n + 1):
        stack = np.vstack([stack, row])
        if la.rank_of(stack, tol=tol).rank == n:
            return nu
        row = row @ A
    raise NotObservable(f"pair is not observable: rank of O(A, C) is {la.rank_of(stack, tol=tol).rank} < {n}")


def observable_decomposition(A: Any, C: Any, tol: Optional[float] = None) -> ObservableDecomposition:
    """
    Orthogonal observable canonical decomposition.

    P_o = [V_r, V_null] where V_r spans range(O(A, C)^T) and V_null spans
    null(O(A, C)). p = n - rank(O(A, C)); p = n (C = 0) gives an empty
    observable block.

    Example:
        >>> d = observable_decomposition([[1, 1], [-1, 1]], [[1, 0]])
        >>> d.p
        0
    """
    A, C = _pair(A, C)
    n = A.shape[0]
    O = observability_matrix(A, C)
    rank, row_basis, null_basis = la.orthonormal_bases(O, tol=tol)
    P_o = np.hstack([row_basis, null_basis])
    A_o = P_o.T @ A @ P_o
    C_o = C @ P_o
    r = rank.rank
    A_ob = A_o[:r, :r]
    C_ob = C_o[:, :r]

    scale = max(1.0, float(np.linalg.norm(A)))
    leak = float(np.linalg.norm(A_o[:r, r:])) if r < n and r > 0 else 0.0
    if leak > 1e-8 * scale:
        logger.warning("Decomposition upper-right block has norm %.2e; rank tolerance may be too loose", leak)

    nu = 0
    if r > 0:
        try:
            nu = observability_index(A_ob, C_ob, tol=tol)
        except NotObservable as e:
            raise NumericalInconsistency(
                f"observable block has rank {r} in O(A, C) but fails the index test at the same tolerance ({e}); "
                f"the rank decision is sensitive to the tolerance")
    return ObservableDecomposition(P_o=P_o, A_o=A_o, C_o=C_o, A_ob=A_ob, C_ob=C_ob,
                                   p=n - r, observability_index=nu, rank_result=rank)


def check_null_space_guarantee(sys: LtiSystem, seq: SamplingSequence,
                               tol: Optional[float] = None) -> NullSpaceReport:
    """
    Hypothesis: rank(O_s(A_ob, C_ob)) = n - p for this schedule.
    Conclusion: null(O_s(A, C)) = null(O(A, C)).

    Both are evaluated independently; the hypothesis implies the conclusion.
    """
    check_domain(sys, seq)
    decomp = observable_decomposition(sys.A, sys.C, tol=tol)
    if decomp.n_ob > 0:
        block = sampled_matrix(decomp.A_ob, decomp.C_ob, seq.times, sys.is_discrete)
        block_rank = la.rank_of(block, tol=tol)
    else:
        block_rank = RankResult(0, (), float(tol or la.EPS))
    hypothesis = block_rank.rank == decomp.n_ob

    O_s = sampled_observability_matrix(sys, sys.C, seq)
    sampled_rank, _, null_s = la.orthonormal_bases(O_s, tol=tol)
    classical_rank, _, null_o = la.orthonormal_bases(observability_matrix(sys.A, sys.C), tol=tol)
    conclusion = la.subspaces_equal(null_s, null_o, tol=1e-6)

    if hypothesis and not conclusion:
        logger.warning("Observable block is sample-observable but null spaces differ; check tolerances")
    return NullSpaceReport(hypothesis, conclusion, block_rank, decomp.n_ob, sampled_rank, classical_rank)
