"""
Sampling Scheme Design

Generates measurement schedules and certifies them by explicit rank
computation. Continuous-time designs use the sample-count bound
k* = d - 1 + T*delta/(2*pi); discrete-time designs draw irregular integer
instants that avoid pathological periods and retry until certified.

Key Features:
- k* bound from eigenvalue indices and the imaginary-part spread
- Uniform (bin midpoints, optional jitter) and random continuous placement
- Pathological periods from eigenvalue aliasing and nilpotent blocks
- Explicit uniform-sampling rank-loss check
- Sliding schedules whose every window is certified
- Target dispatch: full state, observable subspace, and the reduced
  functional designs backed by a row-space, structured-Q or output-subset
  certificate, always re-validated on the original triple
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

import core_linalg as la
import obsvkit_config as config
from core_linalg import RankResult
from functional_observability import (
    StructuredQ,
    is_functionally_observable,
    is_sample_based_functionally_observable,
    jordan_data,
    minimal_output_subsets,
    verify_structured_Q,
)
from obsvkit_errors import DesignFailure, InvalidMatrix, MissingCertificate, NotObservable
from observability import (
    check_null_space_guarantee,
    observability_matrix,
    observable_decomposition,
    sampled_matrix,
)
from system_model import LtiSystem, SamplingSequence, TimeDomain

logger = logging.getLogger(__name__)

TARGETS = (
    "full_state",
    "observable_subspace",
    "functional_via_C",
    "functional_via_Q",
    "functional_via_subset",
)
STRATEGIES = ("uniform", "random")

RngLike = Union[None, int, np.random.Generator]


@dataclass(frozen=True)
class SamplingDesign:
    """A certified schedule and the pair it was designed on."""

    target: Optional[str]
    designed_on: str
    A_design: np.ndarray
    C_design: np.ndarray
    k_star: Optional[float]
    k: int
    sequence: SamplingSequence
    certificate: RankResult
    strategy: str = "random"
    seed: Optional[int] = None
    validation: Optional[Dict[str, Any]] = None
    diagnostics: Tuple[str, ...] = field(default_factory=tuple)

    @property
    def dimension(self) -> int:
        return self.A_design.shape[0]

    def to_dict(self) -> Dict[str, Any]:
        """Sampling JSON plus the certificate block."""
        out: Dict[str, Any] = {
            "domain": self.sequence.domain.value,
            "times": list(self.sequence.times),
            "target": self.target,
            "designed_on": {"pair": self.designed_on, "dimension": self.dimension},
            "k": self.k,
            "k_star": self.k_star,
            "certificate": self.certificate.to_dict(),
            "strategy": self.strategy,
            "seed": self.seed,
        }
        if self.validation is not None:
            out["validation"] = self.validation
        if self.diagnostics:
            out["diagnostics"] = list(self.diagnostics)
        return out


def _rng(seed: RngLike) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def _design_pair(A: Any, C: Any, tol: Optional[float] = None) -> Tuple[np.ndarray, np.ndarray]:
    A = np.asarray(A, dtype=float)
    if A.size == 0:
        return np.zeros((0, 0)), np.zeros((np.atleast_2d(C).shape[0] if np.asarray(C).size else 1, 0))
    A = la.as_square(A, "A_design")
    C = la.as_matrix(C, "C_design")
    n = A.shape[0]
    if C.shape[1] != n:
        raise ValueError(f"C_design must have {n} columns, got {C.shape[1]}")
    rank = la.rank_of(observability_matrix(A, C), tol=tol)
    if rank.rank < n:
        raise NotObservable(f"design pair is not observable (rank {rank.rank} < {n})")
    return A, C


def _certify(A: np.ndarray, C: np.ndarray, times: Sequence[float], discrete: bool,
             tol: Optional[float] = None) -> RankResult:
    if A.shape[0] == 0:
        return RankResult(0, (), float(tol or la.EPS))
    return la.rank_of(sampled_matrix(A, C, times, discrete), tol=tol)


# ---------------------------------------------------------------------------
# Continuous time
# ---------------------------------------------------------------------------

def k_star_bound(A_design: Any, T: float) -> float:
    """
    Sample-count bound d - 1 + T*delta/(2*pi) for a T-long window.

    delta is the spread of imaginary parts of the eigenvalues and d the sum
    of their indices. More than k* distinct instants in the window keep any
    observable pair with this A observable.

    Example:
        >>> k_star_bound([[0, 1], [-1, 0]], 2 * math.pi)
        3.0
    """
    if not T > 0 or not math.isfinite(T):
        raise ValueError(f"T must be a positive finite window length, got {T}")
    A = la.as_square(A_design, "A_design")
    if A.shape[0] == 0:
        return 0.0
    es = la.eigenstructure(A)
    imag = [lam.imag for lam in es.distinct_eigenvalues]
    delta = max(imag) - min(imag)
    return float(es.d - 1 + T * delta / (2 * math.pi))


def _continuous_times(k: int, T: float, strategy: str, rng: np.random.Generator,
                      jitter: float) -> List[float]:
    if strategy == "uniform":
        times = T * (np.arange(1, k + 1) - 0.5) / k
        if jitter > 0:
            times = times + rng.uniform(-jitter, jitter, size=k) * T / (2 * k)
        times = np.clip(times, np.finfo(float).tiny, T)
    else:
        times = np.sort(T - rng.uniform(0.0, T, size=k))
    times = np.unique(times)
    return [float(t) for t in times]


def design_continuous(A_design: Any, C_design: Any, T: float, strategy: str = "uniform",
                      seed: RngLike = None, k: Optional[int] = None, jitter: float = 0.0,
                      retries: int = config.DEFAULT_CONTINUOUS_RETRIES,
                      tol: Optional[float] = None) -> SamplingDesign:
    """
    Place k = floor(k*) + 1 instants in (0, T] and certify them.

    Uniform placement uses bin midpoints T(i - 1/2)/k; random placement draws
    sorted uniform instants. A failed certificate increments k and redraws,
    at most `retries` times.

    Raises:
        DesignFailure: no certified placement found (diagnostics attached)
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"strategy must be one of {', '.join(STRATEGIES)}, got {strategy!r}")
    A, C = _design_pair(A_design, C_design, tol)
    n = A.shape[0]
    k_star = k_star_bound(A, T) if n else 0.0
    k_min = int(math.floor(k_star + 1e-9)) + 1
    if k is not None and k <= k_star:
        logger.info("Requested k=%d does not exceed k*=%.4f; using %d", k, k_star, k_min)
    k = max(k_min, int(k or 0))
    rng = _rng(seed)

    attempts = []
    for attempt in range(retries + 1):
        times = _continuous_times(k, T, strategy, rng, jitter)
        certificate = _certify(A, C, times, discrete=False, tol=tol)
        attempts.append({"k": k, "times": times, "rank": certificate.rank})
        if certificate.rank == n and len(times) == k:
            logger.debug("Continuous design certified with k=%d after %d attempt(s)", k, attempt + 1)
            return SamplingDesign(
                target=None, designed_on="pair", A_design=A, C_design=C, k_star=k_star, k=k,
                sequence=SamplingSequence(tuple(times), TimeDomain.CONTINUOUS), certificate=certificate,
                strategy=strategy, seed=seed if isinstance(seed, int) else None)
        logger.info("Continuous design attempt %d failed (rank %d < %d); retrying", attempt + 1, certificate.rank, n)
        k += 1
    raise DesignFailure(f"no certified continuous design after {retries + 1} attempts",
                        diagnostics={"k_star": k_star, "attempts": attempts})


# ---------------------------------------------------------------------------
# Discrete time
# ---------------------------------------------------------------------------

def _aliasing(lam_i: complex, lam_j: complex, s: int) -> bool:
    r_i, r_j = abs(lam_i), abs(lam_j)
    if r_i == 0 or r_j == 0:
        return False
    if abs(r_i - r_j) > 1e-9 * max(r_i, r_j):
        return False
    turns = s * (np.angle(lam_i) - np.angle(lam_j)) / (2 * math.pi)
    return abs(turns - round(turns)) < 1e-6


def _uniform_sampling_keeps_rank(A: np.ndarray, s: int) -> bool:
    """Whether a generic single output keeps rank n on {0, s, ..., (n-1)s}."""
    n = A.shape[0]
    rho = float(np.max(np.abs(np.linalg.eigvals(A))))
    # power-of-two scaling keeps integer matrices exact
    scale = 2.0 ** math.floor(math.log2(rho)) if rho > 0 else 1.0
    c = np.random.default_rng(0).standard_normal((1, n))
    try:
        sampled = la.rank_of(sampled_matrix(A / scale, c, [i * s for i in range(n)], discrete=True))
    except InvalidMatrix:
        return False
    return sampled.rank == n


def pathological_periods(A_design: Any, s_max: Optional[int] = None) -> List[int]:
    """
    Periods s <= s_max at which uniform sampling can lose rank.

    Two distinct eigenvalues alias when lambda_i^s = lambda_j^s; a zero
    eigenvalue with index >= 2 makes every s >= 2 pathological. A flagged
    period is dropped when a generic output row keeps full rank over
    {0, s, ..., (n-1)s}.

    Example:
        >>> pathological_periods([[1, 1], [-1, 1]], 10)
        [4, 8]
    """
    A = la.as_square(A_design, "A_design")
    n = A.shape[0]
    if n == 0:
        return []
    s_max = config.default_s_max(n) if s_max is None else int(s_max)
    if s_max < 1:
        raise ValueError(f"s_max must be positive, got {s_max}")
    es = la.eigenstructure(A)
    eigenvalues = es.distinct_eigenvalues
    nilpotent = any(abs(lam) <= es.cluster_tol and d >= 2 for lam, d in zip(eigenvalues, es.indices))

    periods = []
    for s in range(1, s_max + 1):
        if nilpotent and s >= 2:
            periods.append(s)
            continue
        if any(_aliasing(eigenvalues[i], eigenvalues[j], s)
               for i in range(len(eigenvalues)) for j in range(i + 1, len(eigenvalues))):
            if _uniform_sampling_keeps_rank(A, s):
                logger.warning("Period %d flagged by eigenvalue aliasing keeps full sampled rank; dropped", s)
                continue
            periods.append(s)
    return periods


def uniform_rank_loss(A: Any, C: Any, s: int, tol: Optional[float] = None) -> Tuple[bool, RankResult]:
    """
    Explicit check: rank of O_s over {0, s, ..., (n-1)s} against rank(O(A, C)).

    Returns:
        (rank is lost, RankResult of the uniformly sampled matrix)
    """
    A = la.as_square(A, "A")
    n = A.shape[0]
    sampled = la.rank_of(sampled_matrix(A, C, [i * int(s) for i in range(n)], discrete=True), tol=tol)
    classical = la.rank_of(observability_matrix(A, C), tol=tol)
    return sampled.rank < classical.rank, sampled


def _draw_discrete(k: int, start: int, bad: set, max_step: int, rng: np.random.Generator) -> List[int]:
    times = [start]
    while len(times) < k:
        for _ in range(64):
            candidate = times[-1] + int(rng.integers(1, max_step + 1))
            if all((candidate - t) not in bad for t in times):
                break
        times.append(candidate)
    return times


def design_discrete(A_design: Any, C_design: Any, k: Optional[int] = None, s_max: Optional[int] = None,
                    seed: RngLike = None, max_step: int = config.DEFAULT_MAX_STEP, start: int = 0,
                    retries: int = config.DEFAULT_DISCRETE_RETRIES,
                    tol: Optional[float] = None) -> SamplingDesign:
    """
    Draw k strictly increasing integer instants whose pairwise spacings avoid
    pathological periods, and certify full rank. The last retry falls back to
    consecutive instants.

    Raises:
        DesignFailure: no certified schedule within the retry budget
    """
    A, C = _design_pair(A_design, C_design, tol)
    n = A.shape[0]
    if n == 0:
        seq = SamplingSequence((int(start),), TimeDomain.DISCRETE)
        return SamplingDesign(None, "pair", A, C, None, 1, seq, _certify(A, C, seq.times, True, tol),
                              seed=seed if isinstance(seed, int) else None)
    q = C.shape[0]
    k = n if k is None else int(k)
    if k < math.ceil(n / q):
        raise ValueError(f"k must be at least ceil(n/q) = {math.ceil(n / q)}, got {k}")
    bad = set(pathological_periods(A, s_max))
    rng = _rng(seed)

    attempts = []
    for attempt in range(retries + 1):
        if attempt == retries:
            times = list(range(start, start + k))
        else:
            times = _draw_discrete(k, start, bad, max(1, max_step), rng)
        certificate = _certify(A, C, times, discrete=True, tol=tol)
        attempts.append({"times": times, "rank": certificate.rank})
        if certificate.rank == n:
            logger.debug("Discrete design certified after %d attempt(s): %s", attempt + 1, times)
            return SamplingDesign(
                target=None, designed_on="pair", A_design=A, C_design=C, k_star=None, k=k,
                sequence=SamplingSequence(tuple(times), TimeDomain.DISCRETE), certificate=certificate,
                seed=seed if isinstance(seed, int) else None)
        logger.info("Discrete design attempt %d failed (rank %d < %d)", attempt + 1, certificate.rank, n)
    raise DesignFailure(f"no certified discrete design with k={k} after {retries + 1} attempts",
                        diagnostics={"pathological_periods": sorted(bad), "attempts": attempts})


def design_sliding_schedule(A_design: Any, C_design: Any, window: int, horizon: int,
                            s_max: Optional[int] = None, seed: RngLike = None,
                            max_step: int = config.DEFAULT_MAX_STEP,
                            tol: Optional[float] = None) -> SamplingSequence:
    """
    Irregular discrete schedule on [0, horizon] in which every run of
    `window` consecutive samples certifies the design pair.

    Raises:
        DesignFailure: some window could not be certified
    """
    A, C = _design_pair(A_design, C_design, tol)
    n = A.shape[0]
    q = max(1, C.shape[0])
    if window < max(1, math.ceil(n / q)):
        raise ValueError(f"window must be at least ceil(n/q) = {math.ceil(n / q)}, got {window}")
    bad = set(pathological_periods(A, s_max)) if n else set()
    rng = _rng(seed)

    times = [0]
    while True:
        chosen = None
        for _ in range(64):
            candidate = times[-1] + int(rng.integers(1, max(1, max_step) + 1))
            recent = times[-(window - 1):] if window > 1 else []
            if any((candidate - t) in bad for t in recent):
                continue
            trial = recent + [candidate]
            if len(trial) < window or _certify(A, C, trial, True, tol).rank == n:
                chosen = candidate
                break
        if chosen is None:
            candidate = times[-1] + 1
            trial = (times[-(window - 1):] if window > 1 else []) + [candidate]
            if len(trial) == window and _certify(A, C, trial, True, tol).rank < n:
                raise DesignFailure("could not certify a sliding window",
                                    diagnostics={"times": times, "window": window})
            chosen = candidate
        if chosen > horizon:
            break
        times.append(chosen)
    if len(times) < window:
        raise DesignFailure(f"horizon {horizon} too short for a window of {window} samples",
                            diagnostics={"times": times})
    return SamplingSequence(tuple(times), TimeDomain.DISCRETE)


# ---------------------------------------------------------------------------
# Target dispatch
# ---------------------------------------------------------------------------

def _check_alpha(C: np.ndarray, F: np.ndarray, alpha: Any) -> np.ndarray:
    alpha = np.atleast_2d(np.asarray(alpha, dtype=float))
    if alpha.shape != (F.shape[0], C.shape[0]):
        raise MissingCertificate(f"alpha must be {F.shape[0]}x{C.shape[0]}, got {alpha.shape}")
    residual = float(np.linalg.norm(F - alpha @ C))
    if residual >= config.DEFAULT_ROWSPACE_RESIDUAL * max(1.0, float(np.linalg.norm(F))):
        raise MissingCertificate(f"row-space certificate does not verify (residual {residual:.2e})")
    return alpha


def design_for_target(sys: LtiSystem, F: Optional[Any] = None, target: str = "observable_subspace",
                      T: Optional[float] = None, k: Optional[int] = None, seed: RngLike = None,
                      strategy: str = "uniform", s_max: Optional[int] = None,
                      certificate: Optional[Any] = None, subset: Optional[Sequence[int]] = None,
                      tol: Optional[float] = None) -> SamplingDesign:
    """
    Design a schedule for a target and validate it on the original system.

    Targets:
        full_state / observable_subspace: design on (A_ob, C_ob)
        functional_via_C: certificate alpha with F = alpha C; design on (A_ob,F, F_ob)
        functional_via_Q: certificate (alpha, Q) with F_J = alpha C_J Q; design on (A_ob,F, F_ob)
        functional_via_subset: design on the observable block of (A, C[subset])

    Raises:
        MissingCertificate: a relaxed target without a valid certificate
        DesignFailure: no certified schedule, or end-to-end validation failed
    """
    if target not in TARGETS:
        raise ValueError(f"target must be one of {', '.join(TARGETS)}, got {target!r}")
    functional_target = target.startswith("functional")
    if functional_target or F is not None:
        F = sys.require_F(F)
    elif sys.F is not None:
        F = sys.F

    if functional_target:
        classical = is_functionally_observable(sys.A, sys.C, F, tol=tol, discrete=sys.is_discrete)
        if not classical.functionally_observable:
            raise DesignFailure("triple is not functionally observable; no schedule can recover z",
                                diagnostics={"classical": classical.to_dict()["classical"]})

    if target in ("full_state", "observable_subspace"):
        decomp = observable_decomposition(sys.A, sys.C, tol=tol)
        if target == "full_state" and decomp.p > 0:
            raise DesignFailure(f"system is not observable (p = {decomp.p})", diagnostics={"p": decomp.p})
        pair, label = (decomp.A_ob, decomp.C_ob), "A_ob,C_ob"
    elif target in ("functional_via_C", "functional_via_Q"):
        if certificate is None:
            raise MissingCertificate(f"target {target} needs a certificate; run analyze to obtain one")
        if target == "functional_via_C":
            _check_alpha(sys.C, F, certificate)
        else:
            try:
                alpha, Q = certificate
            except (TypeError, ValueError):
                raise MissingCertificate("functional_via_Q needs an (alpha, Q) pair")
            if not isinstance(Q, StructuredQ) or not verify_structured_Q(jordan_data(sys.A, F=F, C=sys.C), alpha, Q):
                raise MissingCertificate("structured-Q certificate does not verify")
        decomp = observable_decomposition(sys.A, F, tol=tol)
        pair, label = (decomp.A_ob, decomp.C_ob), "A_ob,F,F_ob"
    else:
        if subset is None:
            subsets = minimal_output_subsets(sys.A, sys.C, F, tol=tol)
            if not subsets:
                raise DesignFailure("no output subset recovers z")
            subset = subsets[0]
        subset = [int(i) for i in subset]
        decomp = observable_decomposition(sys.A, sys.C[subset], tol=tol)
        pair, label = (decomp.A_ob, decomp.C_ob), f"A_ob,C[{','.join(map(str, subset))}]_ob"

    if sys.is_discrete:
        k_design = k if k is not None else max(1, decomp.n_ob)
        design = design_discrete(pair[0], pair[1], k=k_design, s_max=s_max, seed=seed, tol=tol)
    else:
        if T is None:
            raise ValueError("continuous-time designs need a window length T")
        design = design_continuous(pair[0], pair[1], T, strategy=strategy, seed=seed, k=k, tol=tol)

    validation: Dict[str, Any]
    if functional_target:
        holds, test = is_sample_based_functionally_observable(sys, F, design.sequence, tol=tol)
        validation = {"sample_based_functionally_observable": holds, "rank_test": test.to_dict()}
        if not holds:
            raise DesignFailure("designed schedule fails the sampled functional rank test",
                                diagnostics={"times": list(design.sequence.times), **validation})
    else:
        report = check_null_space_guarantee(sys, design.sequence, tol=tol)
        validation = {"null_space_preserved": report.conclusion_holds}
        if F is not None:
            validation["sample_based_functionally_observable"] = is_sample_based_functionally_observable(
                sys, F, design.sequence, tol=tol)[0]
        if not report.conclusion_holds:
            raise DesignFailure("designed schedule does not preserve null(O(A,C))",
                                diagnostics={"times": list(design.sequence.times), **report.to_dict()})
    logger.info("Designed %s schedule %s on %s", target, list(design.sequence.times), label)
    return SamplingDesign(
        target=target, designed_on=label, A_design=design.A_design, C_design=design.C_design,
        k_star=design.k_star, k=design.k, sequence=design.sequence, certificate=design.certificate,
        strategy=design.strategy if not sys.is_discrete else "random",
        seed=seed if isinstance(seed, int) else None, validation=validation)
