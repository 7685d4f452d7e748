"""
Least-Squares Functional Estimator

Reconstructs the observable part of the state from a window of sampled
outputs by least squares, then maps it to z = Fx, propagating in open loop
between measurements. A reduced variant works on the observable block of
(A, F) using outputs combined by a certificate alpha.

Key Features:
- Regressor Phi = stacked C_design Psi(t_i - t_j) with full-column-rank check
- QR-based least squares (no normal equations)
- Open-loop propagation from a prior before the first full window
- Sliding-window simulation with seeded uniform measurement noise
- Steady-state error, Monte-Carlo sweeps (joblib) and CSV export (pandas)
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

import core_linalg as la
import obsvkit_config as config
from functional_observability import StructuredQ
from obsvkit_errors import InvalidMatrix, MissingCertificate, NumericalInconsistency, RankDeficientRegressor
from observability import ObservableDecomposition, observable_decomposition, transition
from system_model import LtiSystem, SamplingSequence, TimeDomain, check_domain

logger = logging.getLogger(__name__)

MODES = ("full", "reduced")


@dataclass(frozen=True)
class Regressor:
    """Stacked regressor Phi and outputs Y for one window of samples."""

    Phi: np.ndarray
    Y: np.ndarray
    first_index: int
    count: int
    base_time: float
    relative_times: Tuple[float, ...]
    rank: la.RankResult
    discrete: bool


@dataclass(frozen=True)
class EstimationRun:
    schedule: SamplingSequence
    window: int
    noise_bound: float
    seed: Optional[int]
    mode: str
    query_times: np.ndarray
    estimates: np.ndarray
    truth: np.ndarray
    error_trace: np.ndarray
    first_window_time: Optional[float]
    notes: Tuple[str, ...] = field(default_factory=tuple)

    def summary(self) -> Dict[str, Any]:
        post = self.post_window_errors()
        return {
            "mode": self.mode,
            "window": self.window,
            "noise_bound": self.noise_bound,
            "seed": self.seed,
            "samples": len(self.schedule.times),
            "first_window_time": self.first_window_time,
            "initial_error": float(self.error_trace[0]) if self.error_trace.size else None,
            "max_post_window_error": float(post.max()) if post.size else None,
            "steady_state_median_error": float(np.median(post)) if post.size else None,
            "notes": list(self.notes),
        }

    def post_window_errors(self) -> np.ndarray:
        if self.first_window_time is None:
            return np.zeros(0)
        return self.error_trace[self.query_times >= self.first_window_time]


# ---------------------------------------------------------------------------
# Regressors and estimates
# ---------------------------------------------------------------------------

def _outputs(outputs: Any, k: int, width: int) -> np.ndarray:
    Y = np.asarray(outputs, dtype=float)
    if Y.ndim == 1:
        Y = Y.reshape(k, -1) if Y.size == k * width else Y
    if Y.shape != (k, width):
        raise InvalidMatrix(f"outputs must be {k}x{width} (one row per sample), got {Y.shape}")
    if not np.all(np.isfinite(Y)):
        raise InvalidMatrix("outputs must be finite")
    return Y


def _assemble(A_design: np.ndarray, C_design: np.ndarray, window: SamplingSequence, Y: np.ndarray,
              first_index: int) -> Regressor:
    discrete = window.domain is TimeDomain.DISCRETE
    base = window.times[0]
    relative = tuple(t - base for t in window.times)
    if A_design.shape[0]:
        Phi = np.vstack([C_design @ transition(A_design, dt, discrete) for dt in relative])
    else:
        Phi = np.zeros((window.k * C_design.shape[0], 0))
    rank = la.rank_of(Phi) if Phi.size else la.RankResult(0, (), la.EPS)
    if rank.rank < Phi.shape[1]:
        raise RankDeficientRegressor(
            f"window {list(window.times)} gives a regressor of rank {rank.rank} < {Phi.shape[1]}",
            rank_result=rank, window=list(window.times))
    return Regressor(Phi=Phi, Y=Y.reshape(-1), first_index=first_index, count=window.k,
                     base_time=float(base), relative_times=relative, rank=rank, discrete=discrete)


def build_regressor(decomp: ObservableDecomposition, seq_window: SamplingSequence, outputs: Any,
                    first_index: int = 0) -> Regressor:
    """
    Phi = (C_ob; C_ob A_ob^{t_{j+1} - t_j}; ...), Y = stacked y(t_i).

    Raises:
        RankDeficientRegressor: Phi lacks full column rank (window attached)
    """
    Y = _outputs(outputs, seq_window.k, decomp.C_ob.shape[0])
    return _assemble(decomp.A_ob, decomp.C_ob, seq_window, Y, first_index)


def estimate_state(reg: Regressor) -> np.ndarray:
    """Least-squares x_ob at the window's base time."""
    return la.solve_least_squares(reg.Phi, reg.Y)


def functional_estimate(decomp: ObservableDecomposition, F: Any, x_hat: np.ndarray, dt: float = 0,
                        discrete: bool = True) -> np.ndarray:
    """z_hat = (F P_o)_ob Psi(dt) x_hat."""
    G = decomp.restrict(F)
    if decomp.n_ob == 0:
        return np.zeros(G.shape[0])
    return G @ (transition(decomp.A_ob, dt, discrete) @ np.asarray(x_hat, dtype=float))


def _alpha_from(certificate: Any) -> np.ndarray:
    if certificate is None:
        raise MissingCertificate("the reduced estimator needs a certificate alpha (or alpha, Q)")
    if isinstance(certificate, tuple) and len(certificate) == 2 and isinstance(certificate[1], StructuredQ):
        certificate = certificate[0]
    alpha = np.atleast_2d(np.asarray(certificate, dtype=float))
    if not np.all(np.isfinite(alpha)):
        raise MissingCertificate("certificate alpha must be finite")
    return alpha


def reduced_output_map(alpha: np.ndarray, decomp_F: ObservableDecomposition, C: Any) -> np.ndarray:
    """
    (alpha C P_o,F)_ob. The unobservable block of alpha C P_o,F must vanish.

    Raises:
        NumericalInconsistency: alpha C leaks into the unobservable subspace of (A, F)
    """
    alpha_C = alpha @ np.atleast_2d(np.asarray(C, dtype=float))
    full = alpha_C @ decomp_F.P_o
    leak = float(np.linalg.norm(full[:, decomp_F.n_ob:])) if decomp_F.p else 0.0
    if leak > 1e-7 * max(1.0, float(np.linalg.norm(alpha_C))):
        raise NumericalInconsistency(f"alpha C is not zero on the unobservable subspace of (A, F) (norm {leak:.2e})")
    return full[:, :decomp_F.n_ob]


def build_reduced_regressor(certificate: Any, decomp_F: ObservableDecomposition, C: Any,
                            seq_window: SamplingSequence, outputs: Any, first_index: int = 0) -> Regressor:
    """
    Phi~ = stacked (alpha C P_o,F)_ob A_ob,F^{dt}, Y~ = stacked alpha y(t_i).

    Raises:
        MissingCertificate: no certificate given
        RankDeficientRegressor: Phi~ lacks full column rank
    """
    alpha = _alpha_from(certificate)
    C = np.atleast_2d(np.asarray(C, dtype=float))
    if alpha.shape[1] != C.shape[0]:
        raise InvalidMatrix(f"alpha must have {C.shape[0]} columns, got {alpha.shape[1]}")
    H = reduced_output_map(alpha, decomp_F, C)
    Y = _outputs(outputs, seq_window.k, C.shape[0]) @ alpha.T
    return _assemble(decomp_F.A_ob, H, seq_window, Y, first_index)


# ---------------------------------------------------------------------------
# Simulation
# ---------------------------------------------------------------------------

def _default_queries(schedule: SamplingSequence, horizon: Optional[float]) -> np.ndarray:
    if horizon is None:
        horizon = max(float(schedule.times[-1]), float(config.DEFAULT_HORIZON))
    if schedule.domain is TimeDomain.DISCRETE:
        return np.arange(0, int(horizon) + 1)
    return np.linspace(0.0, float(horizon), 201)


def simulate_run(sys: LtiSystem, x0: Any, schedule: SamplingSequence, window: int,
                 noise_bound: float = config.DEFAULT_NOISE_BOUND, seed: Optional[int] = config.DEFAULT_SEED,
                 query_times: Optional[Sequence[float]] = None, horizon: Optional[float] = None,
                 mode: str = "full", certificate: Any = None, prior: Optional[Any] = None,
                 F: Optional[Any] = None) -> EstimationRun:
    """
    Simulate y(t_i) = C x(t_i) + d(t_i) with |d| <= noise_bound (uniform, per
    channel, per sample) and estimate z over the query times.

    Every sample that completes a window of `window` samples triggers a new
    least-squares estimate; between samples the latest estimate is
    propagated in open loop. Before the first full window the prior
    (default zero) is propagated from t = 0.

    Raises:
        RankDeficientRegressor: a window is not informative (window attached)
        MissingCertificate: reduced mode without a certificate
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {', '.join(MODES)}, got {mode!r}")
    if window < 1:
        raise ValueError(f"window must be positive, got {window}")
    if noise_bound < 0 or not np.isfinite(noise_bound):
        raise ValueError(f"noise_bound must be a non-negative finite number, got {noise_bound}")
    check_domain(sys, schedule)
    F = sys.require_F(F)
    discrete = sys.is_discrete
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.shape != (sys.n,) or not np.all(np.isfinite(x0)):
        raise InvalidMatrix(f"x0 must be a finite vector of length {sys.n}")
    prior = np.zeros(sys.n) if prior is None else np.asarray(prior, dtype=float).reshape(-1)
    if prior.shape != (sys.n,):
        raise InvalidMatrix(f"prior must have length {sys.n}")
    queries = np.asarray(query_times if query_times is not None else _default_queries(schedule, horizon))

    notes: List[str] = []
    if sys.has_inputs:
        notes.append("system has inputs; simulated with u = 0")

    if mode == "full":
        decomp = observable_decomposition(sys.A, sys.C)
        A_design, C_design = decomp.A_ob, decomp.C_ob
        alpha = None
        leak = float(np.linalg.norm((F @ decomp.P_o)[:, decomp.n_ob:])) if decomp.p else 0.0
        if leak > 1e-7 * max(1.0, float(np.linalg.norm(F))):
            notes.append("F is not functionally observable; its unobservable part is not estimated")
    else:
        alpha = _alpha_from(certificate)
        decomp = observable_decomposition(sys.A, F)
        A_design, C_design = decomp.A_ob, reduced_output_map(alpha, decomp, sys.C)
    G = decomp.restrict(F)

    rng = np.random.default_rng(seed)
    times = schedule.times
    outputs = []
    for t in times:
        d = noise_bound * rng.uniform(-1.0, 1.0, size=sys.q)
        outputs.append(sys.C @ (transition(sys.A, t, discrete) @ x0) + d)
    outputs = np.asarray(outputs)
    if alpha is not None:
        outputs_design = outputs @ alpha.T
    else:
        outputs_design = outputs

    # (base time, x_hat at base) for each completed window, keyed by the window's last sample time
    window_estimates: List[Tuple[float, float, np.ndarray]] = []
    for last in range(window - 1, len(times)):
        first = last - window + 1
        seq_window = schedule.window(first, window)
        reg = _assemble(A_design, C_design, seq_window, outputs_design[first:last + 1], first)
        window_estimates.append((float(times[last]), reg.base_time, estimate_state(reg)))
    first_window_time = window_estimates[0][0] if window_estimates else None
    if first_window_time is None:
        notes.append(f"schedule has fewer than {window} samples; only the prior is propagated")

    prior_ob = decomp.to_observable(prior)
    estimates, truth = [], []
    cursor = -1
    for tau in queries:
        while cursor + 1 < len(window_estimates) and window_estimates[cursor + 1][0] <= tau:
            cursor += 1
        if cursor >= 0:
            _, base, x_hat = window_estimates[cursor]
            z_hat = G @ (transition(A_design, tau - base, discrete) @ x_hat) if A_design.size else np.zeros(G.shape[0])
        else:
            z_hat = G @ (transition(A_design, tau, discrete) @ prior_ob) if A_design.size else np.zeros(G.shape[0])
        estimates.append(z_hat)
        truth.append(F @ (transition(sys.A, tau, discrete) @ x0))
    estimates = np.asarray(estimates).reshape(len(queries), -1)
    truth = np.asarray(truth).reshape(len(queries), -1)
    error = np.linalg.norm(estimates - truth, axis=1)

    logger.debug("Simulated %s run: %d samples, %d windows, noise %.3g", mode, len(times),
                 len(window_estimates), noise_bound)
    return EstimationRun(schedule=schedule, window=window, noise_bound=float(noise_bound), seed=seed,
                         mode=mode, query_times=queries, estimates=estimates, truth=truth, error_trace=error,
                         first_window_time=first_window_time, notes=tuple(notes))


def steady_state_error(run: EstimationRun) -> float:
    """Median |z_hat - z| over query times at or after the first full window."""
    post = run.post_window_errors()
    if post.size == 0:
        raise ValueError("run has no query times after the first full window")
    return float(np.median(post))


def _sweep_task(sys: LtiSystem, x0: Any, schedule: SamplingSequence, window: int, noise_bound: float,
                seed: int, kwargs: Dict[str, Any]) -> Dict[str, Any]:
    run = simulate_run(sys, x0, schedule, window, noise_bound=noise_bound, seed=seed, **kwargs)
    return {
        "noise_bound": float(noise_bound),
        "seed": int(seed),
        "steady_state_error": steady_state_error(run),
        "max_post_window_error": float(run.post_window_errors().max()),
        "initial_error": float(run.error_trace[0]),
    }


def monte_carlo_sweep(sys: LtiSystem, x0: Any, schedule: SamplingSequence, window: int,
                      noise_bounds: Sequence[float], seeds: Sequence[int], n_jobs: int = 1,
                      **kwargs: Any) -> pd.DataFrame:
    """
    simulate_run over every (noise_bound, seed) pair, in parallel with joblib.

    Rows come back in (noise_bound, seed) order regardless of n_jobs.
    """
    tasks = [(float(b), int(s)) for b in noise_bounds for s in seeds]
    rows = Parallel(n_jobs=n_jobs)(
        delayed(_sweep_task)(sys, x0, schedule, window, b, s, kwargs) for b, s in tasks)
    return pd.DataFrame(rows, columns=["noise_bound", "seed", "steady_state_error",
                                       "max_post_window_error", "initial_error"])


def run_to_frame(run: EstimationRun) -> pd.DataFrame:
    """Columns time, z_true, z_hat, abs_error (z_true_i / z_hat_i per component when r > 1)."""
    data: Dict[str, Any] = {"time": run.query_times}
    r = run.truth.shape[1]
    if r == 1:
        data["z_true"] = run.truth[:, 0]
        data["z_hat"] = run.estimates[:, 0]
    else:
        for i in range(r):
            data[f"z_true_{i}"] = run.truth[:, i]
        for i in range(r):
            data[f"z_hat_{i}"] = run.estimates[:, i]
    data["abs_error"] = run.error_trace
    return pd.DataFrame(data)


def write_run_csv(run: EstimationRun, path: str) -> None:
    run_to_frame(run).to_csv(path, index=False, float_format="%.12g", lineterminator="\n")
