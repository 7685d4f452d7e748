"""
Functional Observability Engine

Decides whether z = Fx can be reconstructed from outputs, both from the
continuous output record (classical) and from outputs taken only at given
sampling instants (sample-based), and searches for the certificates that
allow a schedule to be designed on the smaller observable block of (A, F).

Key Features:
- Classical tests: rank(O(A,C); O(A,F)) and rank(O(A,C); F) against rank(O(A,C)),
  evaluated separately and cross-checked
- Sample-based test rank(O_s(A,C); O(A,F)) = rank(O_s(A,C)) plus the two
  weaker necessary conditions built from O_s(A,F) and F
- Null-space inclusion oracle null(O_s(A,C)) within null(O(A,F))
- Row-space certificate F = alpha C
- Complex Jordan data with conjugate-paired ordering
- Structured-Q certificate F_J = alpha C_J Q: verification and an exact
  linear search valid for every Jordan structure with one block per eigenvalue
- Output subsets of least observable dimension that still recover z
"""

import itertools
import logging
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg

import core_linalg as la
import obsvkit_config as config
from core_linalg import RankResult
from obsvkit_errors import InvalidMatrix, InvalidQ, NumericalInconsistency, UnsupportedStructure
from observability import (
    observability_matrix,
    observable_decomposition,
    sampled_observability_matrix,
)
from system_model import LtiSystem, SamplingSequence, check_domain

logger = logging.getLogger(__name__)

RngLike = Union[None, int, np.random.Generator]


# ---------------------------------------------------------------------------
# Result types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RankTest:
    """rank(base; extra) = rank(base), with both ranks kept as evidence."""

    holds: bool
    base: RankResult
    stacked: RankResult

    def to_dict(self) -> Dict[str, Any]:
        return {"holds": self.holds, "base": self.base.to_dict(), "stacked": self.stacked.to_dict()}


@dataclass(frozen=True)
class StructuredQ:
    """
    Block-diagonal Q whose j-th block is q_{j,1} I + q_{j,2} U + ... + q_{j,k_j} U^{k_j - 1},
    U being the upper shift of size k_j.
    """

    block_sizes: Tuple[int, ...]
    coefficients: Tuple[Tuple[complex, ...], ...]

    def __post_init__(self):
        sizes = tuple(int(k) for k in self.block_sizes)
        coeffs = tuple(tuple(complex(c) for c in block) for block in self.coefficients)
        if len(sizes) != len(coeffs):
            raise InvalidQ(f"{len(sizes)} block sizes but {len(coeffs)} coefficient blocks")
        for j, (k, block) in enumerate(zip(sizes, coeffs)):
            if k < 1 or len(block) != k:
                raise InvalidQ(f"block {j}: size {k} needs {k} coefficients, got {len(block)}")
        object.__setattr__(self, "block_sizes", sizes)
        object.__setattr__(self, "coefficients", coeffs)

    @classmethod
    def diagonal(cls, values: Sequence[complex]) -> "StructuredQ":
        return cls(tuple(1 for _ in values), tuple((v,) for v in values))

    @classmethod
    def identity(cls, block_sizes: Sequence[int]) -> "StructuredQ":
        return cls(tuple(block_sizes), tuple((1.0,) + (0.0,) * (k - 1) for k in block_sizes))

    @property
    def n(self) -> int:
        return sum(self.block_sizes)

    @property
    def is_nonsingular(self) -> bool:
        return all(abs(block[0]) > 0 for block in self.coefficients)

    @property
    def assembled(self) -> np.ndarray:
        blocks = [scipy.linalg.toeplitz(np.r_[block[0], np.zeros(k - 1)], np.asarray(block))
                  for k, block in zip(self.block_sizes, self.coefficients)]
        return scipy.linalg.block_diag(*blocks).astype(complex)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "block_sizes": list(self.block_sizes),
            "coefficients": [[[c.real, c.imag] for c in block] for block in self.coefficients],
        }


@dataclass(frozen=True)
class JordanData:
    """A_J = T^{-1} A T with C_J = C T and F_J = F T."""

    A_J: np.ndarray
    C_J: np.ndarray
    F_J: Optional[np.ndarray]
    block_sizes: Tuple[int, ...]
    block_eigenvalues: Tuple[complex, ...]
    transformation: np.ndarray
    geometric_multiplicity_one: bool

    def block_slices(self) -> List[slice]:
        starts = np.cumsum((0,) + self.block_sizes)
        return [slice(int(a), int(b)) for a, b in zip(starts[:-1], starts[1:])]


@dataclass(frozen=True)
class FunctionalObservabilityReport:
    classical_output_stack: RankTest
    classical_functional_stack: RankTest
    functionally_observable: bool
    consistent: bool
    p: int
    p_F: int
    nu: int
    sigma: int
    horizon_note: str
    sample_based: Optional[RankTest] = None
    condition_ii: Optional[RankTest] = None
    condition_iii: Optional[RankTest] = None
    oracle: Optional[bool] = None
    rowspace_alpha: Optional[np.ndarray] = None
    structured_q: Optional[Tuple[np.ndarray, StructuredQ]] = None
    structured_q_residual: Optional[float] = None
    diagnostics: Tuple[str, ...] = field(default_factory=tuple)

    def to_dict(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {
            "classical": {
                "output_stack": self.classical_output_stack.to_dict(),
                "functional_stack": self.classical_functional_stack.to_dict(),
                "functionally_observable": self.functionally_observable,
                "consistent": self.consistent,
            },
            "p": self.p,
            "p_F": self.p_F,
            "nu": self.nu,
            "sigma": self.sigma,
            "horizon_note": self.horizon_note,
            "diagnostics": list(self.diagnostics),
        }
        if self.sample_based is not None:
            out["sampled"] = {
                "functionally_observable": self.sample_based.holds,
                "stack_with_O_AF": self.sample_based.to_dict(),
                "condition_ii": self.condition_ii.to_dict() if self.condition_ii else None,
                "condition_iii": self.condition_iii.to_dict() if self.condition_iii else None,
                "null_space_oracle": self.oracle,
            }
        out["certificates"] = {
            "rowspace_alpha": None if self.rowspace_alpha is None else self.rowspace_alpha.tolist(),
            "structured_q": None if self.structured_q is None else {
                "alpha": self.structured_q[0].tolist(),
                "Q": self.structured_q[1].to_dict(),
                "residual": self.structured_q_residual,
            },
        }
        return out


# ---------------------------------------------------------------------------
# Rank tests
# ---------------------------------------------------------------------------

def stacked_rank_test(base: np.ndarray, extra: np.ndarray, tol: Optional[float] = None) -> RankTest:
    base_rank = la.rank_of(base, tol=tol)
    stacked_rank = la.rank_of(np.vstack([base, extra]), tol=tol)
    return RankTest(stacked_rank.rank == base_rank.rank, base_rank, stacked_rank)


def _triple(A: Any, C: Any, F: Any) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    A = la.as_square(A, "A")
    C = la.as_matrix(C, "C")
    F = la.as_matrix(F, "F")
    n = A.shape[0]
    if C.shape[1] != n or F.shape[1] != n:
        raise InvalidMatrix(f"C and F need {n} columns, got {C.shape[1]} and {F.shape[1]}")
    return A, C, F


def is_functionally_observable(A: Any, C: Any, F: Any, tol: Optional[float] = None,
                               discrete: bool = True) -> FunctionalObservabilityReport:
    """
    Classical functional observability of (A, C, F).

    Evaluates rank(O(A,C); O(A,F)) = rank(O(A,C)) and rank(O(A,C); F) = rank(O(A,C)).
    The two are equivalent; a disagreement is recorded as a diagnostic and
    the triple is only declared functionally observable when both hold.
    """
    A, C, F = _triple(A, C, F)
    O = observability_matrix(A, C)
    output_stack = stacked_rank_test(O, observability_matrix(A, F), tol=tol)
    functional_stack = stacked_rank_test(O, F, tol=tol)
    consistent = output_stack.holds == functional_stack.holds
    diagnostics: List[str] = []
    if not consistent:
        message = ("NumericalInconsistency: stacking O(A,F) and stacking F disagree "
                   f"(ranks {output_stack.stacked.rank} and {functional_stack.stacked.rank} "
                   f"against {output_stack.base.rank})")
        diagnostics.append(message)
        logger.warning(message)

    decomp_F = observable_decomposition(A, F, tol=tol)
    nu = decomp_F.observability_index
    sigma = max(nu - 2, 0) if discrete else 0
    return FunctionalObservabilityReport(
        classical_output_stack=output_stack,
        classical_functional_stack=functional_stack,
        functionally_observable=output_stack.holds and functional_stack.holds,
        consistent=consistent,
        p=A.shape[0] - output_stack.base.rank,
        p_F=decomp_F.p,
        nu=nu,
        sigma=sigma,
        horizon_note=f"reconstruction horizon must exceed sigma = {sigma}",
        diagnostics=tuple(diagnostics),
    )


def is_sample_based_functionally_observable(sys: LtiSystem, F: Optional[Any], seq: SamplingSequence,
                                            tol: Optional[float] = None) -> Tuple[bool, RankTest]:
    """
    rank(O_s(A,C); O(A,F)) = rank(O_s(A,C)): necessary and sufficient for
    reconstructing z over the whole horizon from the samples alone.
    """
    F = sys.require_F(F)
    O_s = sampled_observability_matrix(sys, sys.C, seq)
    test = stacked_rank_test(O_s, observability_matrix(sys.A, F), tol=tol)
    return test.holds, test


def condition_ii(sys: LtiSystem, F: Optional[Any], seq: SamplingSequence,
                 tol: Optional[float] = None) -> Tuple[bool, RankTest]:
    """rank(O_s(A,C); O_s(A,F)) = rank(O_s(A,C)). Necessary only."""
    F = sys.require_F(F)
    test = stacked_rank_test(sampled_observability_matrix(sys, sys.C, seq),
                             sampled_observability_matrix(sys, F, seq), tol=tol)
    return test.holds, test


def condition_iii(sys: LtiSystem, F: Optional[Any], seq: SamplingSequence,
                  tol: Optional[float] = None) -> Tuple[bool, RankTest]:
    """rank(O_s(A,C); F) = rank(O_s(A,C)). Necessary only."""
    F = sys.require_F(F)
    test = stacked_rank_test(sampled_observability_matrix(sys, sys.C, seq), F, tol=tol)
    return test.holds, test


def definition_check_oracle(sys: LtiSystem, F: Optional[Any], seq: SamplingSequence,
                            tol: Optional[float] = None, residual_tol: float = 1e-6) -> bool:
    """
    Semantic check: every initial state whose sampled outputs all vanish
    must also produce z = F x(t) = 0 for all t. Equivalent to
    null(O_s(A,C)) being contained in null(O(A,F)).
    """
    F = sys.require_F(F)
    check_domain(sys, seq)
    null_s = la.null_space_basis(sampled_observability_matrix(sys, sys.C, seq), tol=tol)
    if null_s.shape[1] == 0:
        return True
    O_F = observability_matrix(sys.A, F)
    scale = max(1.0, float(np.linalg.norm(O_F, 2)))
    worst = float(np.max(np.linalg.norm(O_F @ null_s, axis=0)))
    return worst <= residual_tol * scale


def rowspace_certificate(C: Any, F: Any, residual_tol: float = config.DEFAULT_ROWSPACE_RESIDUAL) -> Optional[np.ndarray]:
    """
    Minimum-norm alpha with F = alpha C, or None when F is not in the row space of C.

    Example:
        >>> rowspace_certificate([[1, 0], [0, 1]], [[2, 0]]).tolist()
        [[2.0, 0.0]]
    """
    C = la.as_matrix(C, "C")
    F = la.as_matrix(F, "F")
    if C.shape[1] != F.shape[1]:
        raise InvalidMatrix(f"C and F need the same column count, got {C.shape[1]} and {F.shape[1]}")
    solution, _, _, _ = scipy.linalg.lstsq(C.T, F.T)
    alpha = solution.T
    residual = float(np.linalg.norm(F - alpha @ C))
    if residual >= residual_tol * max(1.0, float(np.linalg.norm(F))):
        return None
    return alpha


# ---------------------------------------------------------------------------
# Jordan data
# ---------------------------------------------------------------------------

def _scale_last_entry(v: np.ndarray) -> complex:
    """Factor that makes the last non-negligible entry of v equal to 1."""
    threshold = 1e-8 * float(np.linalg.norm(v))
    for x in v[::-1]:
        if abs(x) > threshold:
            return 1.0 / x
    return 1.0


def _jordan_chain(A: np.ndarray, lam: complex, size: int) -> np.ndarray:
    """Columns v_1..v_size with (A - lam I) v_1 = 0 and (A - lam I) v_{i+1} = v_i."""
    n = A.shape[0]
    real = lam.imag == 0
    N = A - (lam.real if real else lam) * np.eye(n)
    # generalised eigenspace: right singular vectors of the smallest singular values of N^size
    _, _, vh = scipy.linalg.svd(np.linalg.matrix_power(N, size))
    basis = vh.conj().T[:, n - size:]
    if size == 1:
        head = basis[:, 0]
    else:
        lower = np.linalg.matrix_power(N, size - 1) @ basis
        _, _, wh = scipy.linalg.svd(lower)
        head = basis @ wh.conj()[0]
    chain = [head]
    for _ in range(size - 1):
        chain.append(N @ chain[-1])
    chain.reverse()
    chain = np.column_stack(chain)
    chain = chain * _scale_last_entry(chain[:, 0])
    return chain.real if real else chain


def jordan_data(sys_or_A: Union[LtiSystem, Any], F: Optional[Any] = None, C: Optional[Any] = None,
                cluster_tol: Optional[float] = None) -> JordanData:
    """
    Complex Jordan data (A_J, C_J, F_J) of a system with one Jordan block per eigenvalue.

    Ordering: real eigenvalues by decreasing value, then conjugate pairs by
    decreasing real part with the negative-imaginary member first; the
    partner chain is the exact conjugate. Each chain is scaled so the last
    non-negligible entry of its eigenvector is 1.

    Raises:
        UnsupportedStructure: an eigenvalue carries more than one Jordan block
        NumericalInconsistency: eigenvalue clusters are ambiguous at cluster_tol, or the
            Jordan basis does not reproduce A
    """
    if isinstance(sys_or_A, LtiSystem):
        A = sys_or_A.A
        C = sys_or_A.C if C is None else C
        F = sys_or_A.F if F is None else F
    else:
        A = sys_or_A
    A = la.as_square(A, "A")
    n = A.shape[0]
    C = la.as_matrix(C, "C") if C is not None else np.zeros((0, n))
    F = la.as_matrix(F, "F") if F is not None else None

    es = la.eigenstructure(A, cluster_tol=cluster_tol)
    if es.warnings:
        raise NumericalInconsistency(f"Jordan structure is not reliable: {es.warnings[0]}")
    bad = [lam for lam, g in zip(es.distinct_eigenvalues, es.geometric_multiplicities) if g > 1]
    if bad:
        raise UnsupportedStructure(
            f"eigenvalue(s) {', '.join(f'{lam:.6g}' for lam in bad)} carry more than one Jordan block")

    reals = [(lam, m) for lam, m in zip(es.distinct_eigenvalues, es.algebraic_multiplicities) if lam.imag == 0]
    lower = [(lam, m) for lam, m in zip(es.distinct_eigenvalues, es.algebraic_multiplicities) if lam.imag < 0]
    reals.sort(key=lambda item: -item[0].real)
    lower.sort(key=lambda item: (-item[0].real, item[0].imag))

    chains, sizes, eigenvalues = [], [], []
    for lam, m in reals:
        chains.append(_jordan_chain(A, lam, m).astype(complex))
        sizes.append(m)
        eigenvalues.append(lam)
    for lam, m in lower:
        chain = _jordan_chain(A, lam, m)
        chains.extend([chain, chain.conj()])
        sizes.extend([m, m])
        eigenvalues.extend([lam, lam.conjugate()])
    if sum(sizes) != n:
        raise NumericalInconsistency("complex eigenvalues are not in conjugate pairs")

    T = np.hstack(chains)
    A_J = scipy.linalg.block_diag(*[lam * np.eye(k) + np.eye(k, k=1) for lam, k in zip(eigenvalues, sizes)])
    residual = float(np.linalg.norm(A @ T - T @ A_J))
    scale = max(1.0, float(np.linalg.norm(A))) * max(1.0, float(np.linalg.norm(T)))
    if residual > 1e-6 * scale:
        raise NumericalInconsistency(f"Jordan basis residual {residual:.2e} is too large")
    logger.debug("Jordan data: blocks %s, residual %.2e", sizes, residual)

    return JordanData(
        A_J=A_J.astype(complex),
        C_J=C @ T,
        F_J=None if F is None else F @ T,
        block_sizes=tuple(sizes),
        block_eigenvalues=tuple(complex(lam) for lam in eigenvalues),
        transformation=T,
        geometric_multiplicity_one=True,
    )


# ---------------------------------------------------------------------------
# Structured-Q certificates
# ---------------------------------------------------------------------------

def _check_certificate_shapes(jd: JordanData, alpha: Any, Q: StructuredQ) -> np.ndarray:
    if jd.F_J is None:
        raise InvalidMatrix("Jordan data carries no functional output F_J")
    if tuple(Q.block_sizes) != tuple(jd.block_sizes):
        raise InvalidQ(f"Q block sizes {list(Q.block_sizes)} do not match Jordan blocks {list(jd.block_sizes)}")
    alpha = np.atleast_2d(np.asarray(alpha))
    if alpha.shape != (jd.F_J.shape[0], jd.C_J.shape[0]):
        raise InvalidMatrix(f"alpha must be {jd.F_J.shape[0]}x{jd.C_J.shape[0]}, got {alpha.shape}")
    return alpha


def structured_q_residual(jd: JordanData, alpha: Any, Q: StructuredQ) -> float:
    """||F_J - alpha C_J Q|| (Frobenius)."""
    alpha = _check_certificate_shapes(jd, alpha, Q)
    return float(np.linalg.norm(jd.F_J - alpha @ jd.C_J @ Q.assembled))


def verify_structured_Q(jd: JordanData, alpha: Any, Q: StructuredQ,
                        tol: float = config.DEFAULT_VERIFY_TOL) -> bool:
    """
    True iff Q is nonsingular and F_J = alpha C_J Q within tol (relative to max(1, ||F_J||)).

    Raises:
        InvalidQ: Q block sizes differ from the Jordan blocks
    """
    residual = structured_q_residual(jd, alpha, Q)
    if not Q.is_nonsingular:
        return False
    return residual < tol * max(1.0, float(np.linalg.norm(jd.F_J)))


def _toeplitz_inverse(p: np.ndarray) -> np.ndarray:
    """Coefficients of the inverse of sum_l p_l U^l (truncated power series)."""
    q = np.zeros(len(p), dtype=complex)
    q[0] = 1.0 / p[0]
    for m in range(1, len(p)):
        q[m] = -q[0] * np.dot(p[1:m + 1], q[m - 1::-1])
    return q


def _rng(seed: RngLike) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def find_structured_Q(jd: JordanData, seed: RngLike = None,
                      redraws: int = config.DEFAULT_Q_REDRAWS) -> Optional[Tuple[np.ndarray, StructuredQ]]:
    """
    Search for real alpha and structured Q with F_J = alpha C_J Q.

    Writing P = Q^{-1} (same block structure) turns the condition into the
    homogeneous linear system alpha C_J = F_J P in the real unknowns
    (alpha, Re p, Im p). A random element of its null space is drawn until
    every block with nonzero F_J has an invertible P block; blocks with
    F_J = 0 get P = I. alpha is scaled so its first non-negligible entry is
    1. A returned certificate always passes verify_structured_Q.

    Raises:
        UnsupportedStructure: an eigenvalue carries more than one Jordan block
    """
    if not jd.geometric_multiplicity_one:
        raise UnsupportedStructure("structured-Q search needs one Jordan block per eigenvalue")
    if jd.F_J is None:
        raise InvalidMatrix("Jordan data carries no functional output F_J")
    C_J, F_J = jd.C_J, jd.F_J
    q, r, n = C_J.shape[0], F_J.shape[0], C_J.shape[1]
    slices = jd.block_slices()
    f_scale = max(1.0, float(np.linalg.norm(F_J)))

    # unknown layout: vec(alpha) row-major, then per block (Re p_0, Im p_0, Re p_1, ...)
    n_alpha = r * q
    offsets = np.cumsum([n_alpha] + [2 * k for k in jd.block_sizes])
    rows = []
    for rho in range(r):
        for col in range(n):
            j = next(b for b, s in enumerate(slices) if s.start <= col < s.stop)
            m = col - slices[j].start
            row = np.zeros(int(offsets[-1]), dtype=complex)
            row[rho * q:(rho + 1) * q] = C_J[:, col]
            for ell in range(m + 1):
                f = F_J[rho, slices[j].start + m - ell]
                row[offsets[j] + 2 * ell] -= f
                row[offsets[j] + 2 * ell + 1] -= 1j * f
            rows.append(row.real)
            rows.append(row.imag)
    system = np.vstack(rows)
    null = la.null_space_basis(system, rtol=1e-10)
    if null.shape[1] == 0:
        logger.debug("Structured-Q system has a trivial null space")
        return None

    active = [float(np.linalg.norm(F_J[:, s])) > 1e-12 * f_scale for s in slices]
    rng = _rng(seed)
    for attempt in range(max(1, redraws)):
        w = null @ rng.standard_normal(null.shape[1])
        alpha = w[:n_alpha].reshape(r, q)
        nonzero = np.flatnonzero(np.abs(alpha.ravel()) > 1e-10 * max(1.0, float(np.abs(w).max())))
        if nonzero.size:
            w = w / alpha.ravel()[nonzero[0]]
            alpha = w[:n_alpha].reshape(r, q)
        coefficients = []
        feasible = True
        for j, k in enumerate(jd.block_sizes):
            raw = w[offsets[j]:offsets[j] + 2 * k]
            p = raw[0::2] + 1j * raw[1::2]
            if not active[j]:
                p = np.r_[1.0, np.zeros(k - 1)].astype(complex)
            elif abs(p[0]) <= 1e-9 * max(1.0, float(np.abs(p).max())):
                feasible = False
                break
            coefficients.append(tuple(_toeplitz_inverse(p)))
        if not feasible:
            continue
        Q = StructuredQ(jd.block_sizes, tuple(coefficients))
        if verify_structured_Q(jd, alpha, Q):
            logger.debug("Structured-Q certificate found on draw %d", attempt + 1)
            return alpha, Q
    logger.info("No structured-Q certificate after %d draws", redraws)
    return None


# ---------------------------------------------------------------------------
# Output subsets and full report
# ---------------------------------------------------------------------------

def minimal_output_subsets(A: Any, C: Any, F: Any, tol: Optional[float] = None,
                           max_outputs: int = 12) -> List[Tuple[int, ...]]:
    """
    Row subsets of C that keep (A, C_subset, F) functionally observable with
    the smallest observable dimension rank(O(A, C_subset)). Only
    inclusion-minimal subsets are returned, sorted by size then indices.
    """
    A, C, F = _triple(A, C, F)
    q = C.shape[0]
    if q > max_outputs:
        raise ValueError(f"subset search limited to {max_outputs} outputs, got {q}")
    O_F = observability_matrix(A, F)
    candidates = []
    for size in range(1, q + 1):
        for subset in itertools.combinations(range(q), size):
            O = observability_matrix(A, C[list(subset)])
            test = stacked_rank_test(O, O_F, tol=tol)
            if test.holds:
                candidates.append((test.base.rank, subset))
    if not candidates:
        return []
    best = min(rank for rank, _ in candidates)
    chosen: List[Tuple[int, ...]] = []
    for rank, subset in sorted(candidates, key=lambda c: (len(c[1]), c[1])):
        if rank == best and not any(set(kept) <= set(subset) for kept in chosen):
            chosen.append(subset)
    return chosen


def functional_report(sys: LtiSystem, F: Optional[Any] = None, seq: Optional[SamplingSequence] = None,
                      tol: Optional[float] = None, seed: RngLike = 0) -> FunctionalObservabilityReport:
    """
    Classical and (when a schedule is given) sample-based verdicts, sigma and
    the row-space / structured-Q certificates in one record.
    """
    F = sys.require_F(F)
    report = is_functionally_observable(sys.A, sys.C, F, tol=tol, discrete=sys.is_discrete)
    diagnostics = list(report.diagnostics)
    updates: Dict[str, Any] = {}

    if seq is not None:
        holds, sampled = is_sample_based_functionally_observable(sys, F, seq, tol=tol)
        _, test_ii = condition_ii(sys, F, seq, tol=tol)
        _, test_iii = condition_iii(sys, F, seq, tol=tol)
        oracle = definition_check_oracle(sys, F, seq, tol=tol)
        if holds and not (test_ii.holds and test_iii.holds):
            diagnostics.append("NumericalInconsistency: sampled stack holds but a necessary condition fails")
        if oracle != holds:
            diagnostics.append("NumericalInconsistency: null-space oracle disagrees with the sampled rank test")
        updates.update(sample_based=sampled, condition_ii=test_ii, condition_iii=test_iii, oracle=oracle)

    updates["rowspace_alpha"] = rowspace_certificate(sys.C, F)
    try:
        jd = jordan_data(sys.A, F=F, C=sys.C)
        found = find_structured_Q(jd, seed=seed)
        if found is not None:
            updates["structured_q"] = found
            updates["structured_q_residual"] = structured_q_residual(jd, *found)
    except UnsupportedStructure as e:
        diagnostics.append(f"structured-Q search skipped: {e}")
    except NumericalInconsistency as e:
        diagnostics.append(f"structured-Q search skipped: {e}")

    consistent = report.consistent and not any(d.startswith("NumericalInconsistency") for d in diagnostics)
    return replace(report, consistent=consistent, diagnostics=tuple(diagnostics), **updates)
