"""
Random systems, schedules and matrices for the property tests.

The plain generators take a numpy Generator; the hypothesis strategies draw
shapes and a seed and hand the matrix entries to the generators, so a
failing example shrinks to a small shape and a single seed.
"""

from typing import Optional, Tuple

import numpy as np
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from system_model import LtiSystem, SamplingSequence, TimeDomain

# Every property test sees the same 200 examples on every run.
PROPERTY_SETTINGS = settings(
    max_examples=200,
    derandomize=True,
    deadline=None,
    suppress_health_check=[HealthCheck.function_scoped_fixture, HealthCheck.too_slow],
)

seeds = st.integers(min_value=0, max_value=2 ** 32 - 1)


def random_orthogonal(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-ish random orthogonal matrix via QR with sign correction."""
    Q, R = np.linalg.qr(rng.standard_normal((n, n)))
    return Q * np.sign(np.diag(R))


def random_partially_observable(rng: np.random.Generator, n: int, q: int, p: int,
                                r: int = 1, functional: str = "random",
                                domain: TimeDomain = TimeDomain.DISCRETE,
                                spectral_radius: Optional[float] = None) -> LtiSystem:
    """
    Random system whose unobservable subspace has dimension p (generically).

    Built as A_o = [[A11, 0], [A21, A22]], C_o = [C1, 0] and rotated by a
    random orthogonal matrix. functional selects F:
    - "observable": F = M C (functionally observable by construction)
    - "hidden": F touches the unobservable block (not functionally observable)
    - "random": a random F
    """
    n_ob = n - p
    A11 = rng.standard_normal((n_ob, n_ob))
    A21 = rng.standard_normal((p, n_ob))
    A22 = rng.standard_normal((p, p))
    A_o = np.block([[A11, np.zeros((n_ob, p))], [A21, A22]])
    C_o = np.hstack([rng.standard_normal((q, n_ob)), np.zeros((q, p))])
    P = random_orthogonal(n, rng)
    A = P @ A_o @ P.T
    C = C_o @ P.T
    rho = np.max(np.abs(np.linalg.eigvals(A)))
    target = spectral_radius if spectral_radius is not None else rng.uniform(0.6, 1.2)
    if rho > 0:
        A = A * (target / rho)
    if functional == "observable":
        F = rng.standard_normal((r, q)) @ C
    elif functional == "hidden":
        F_o = np.hstack([rng.standard_normal((r, n_ob)), rng.standard_normal((r, p))])
        F = F_o @ P.T
    else:
        F = rng.standard_normal((r, n))
    return LtiSystem(A=A, B=np.zeros((n, 0)), C=C, D=np.zeros((q, 0)), F=F, domain=domain)


@st.composite
def partially_observable_systems(draw, min_n: int = 1, max_n: int = 5, min_p: int = 0,
                                 max_p: Optional[int] = None, max_q: Optional[int] = None, max_r: int = 1,
                                 min_observable: int = 0,
                                 functional: Optional[str] = "random",
                                 domain: TimeDomain = TimeDomain.DISCRETE,
                                 spectral_radius: Optional[float] = None) -> Tuple[LtiSystem, int]:
    """
    (system, planted p) from random_partially_observable with n, q and p drawn.

    q is drawn from [1, n] (capped by max_q) and p from [min_p, n] (capped by
    max_p and by n - min_observable); F has between 1 and max_r rows.
    functional=None also draws the kind of F.
    """
    n = draw(st.integers(min_value=min_n, max_value=max_n))
    q = draw(st.integers(min_value=1, max_value=n if max_q is None else min(n, max_q)))
    upper_p = min(n if max_p is None else min(n, max_p), n - min_observable)
    p = draw(st.integers(min_value=min(min_p, upper_p), max_value=upper_p))
    r = draw(st.integers(min_value=1, max_value=max_r))
    kind = functional or draw(st.sampled_from(["observable", "hidden", "random"]))
    seed = draw(seeds)
    system = random_partially_observable(np.random.default_rng(seed), n, q, p, r=r, functional=kind,
                                         domain=domain, spectral_radius=spectral_radius)
    return system, p


@st.composite
def discrete_schedules(draw, min_k: int = 1, max_k: int = 6, max_step: int = 5) -> SamplingSequence:
    """Strictly increasing integer instants starting anywhere in [0, max_step)."""
    steps = draw(st.lists(st.integers(min_value=1, max_value=max_step), min_size=min_k, max_size=max_k))
    return SamplingSequence(tuple(int(t) for t in np.cumsum(steps) - 1), TimeDomain.DISCRETE)


@st.composite
def continuous_schedules(draw, min_k: int = 1, max_k: int = 6, horizon: float = 5.0,
                         step: float = 0.05) -> SamplingSequence:
    """Distinct instants on a grid of spacing `step` in [0, horizon), sorted."""
    slots = draw(st.lists(st.integers(min_value=0, max_value=int(round(horizon / step)) - 1),
                          min_size=min_k, max_size=max_k, unique=True))
    return SamplingSequence(tuple(float(i * step) for i in sorted(slots)), TimeDomain.CONTINUOUS)


def bounded_matrices(rows, cols, bound: float = 10.0):
    """Finite float64 matrices with entries in [-bound, bound]."""
    return arrays(np.float64, (rows, cols),
                  elements=st.floats(min_value=-bound, max_value=bound, allow_nan=False, allow_infinity=False))


@st.composite
def square_matrices(draw, min_n: int = 1, max_n: int = 5, bound: float = 2.0) -> np.ndarray:
    n = draw(st.integers(min_value=min_n, max_value=max_n))
    return draw(bounded_matrices(n, n, bound))


@st.composite
def integer_matrices(draw, max_rows: int = 6, max_cols: int = 6, bound: int = 3) -> np.ndarray:
    """Small integer matrices, exact in floating point."""
    rows = draw(st.integers(min_value=1, max_value=max_rows))
    cols = draw(st.integers(min_value=1, max_value=max_cols))
    return draw(arrays(np.int64, (rows, cols), elements=st.integers(min_value=-bound, max_value=bound)))
