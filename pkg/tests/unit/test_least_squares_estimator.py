"""
Unit tests for least_squares_estimator.py.
Regressor assembly, least-squares state recovery, the reduced estimator,
simulation runs and their tabular exports.
"""

import pytest
import numpy as np
import pandas as pd
import sys
import os

# Add project root to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__)))))

import reference_systems as refs
from least_squares_estimator import (
    build_reduced_regressor,
    build_regressor,
    estimate_state,
    functional_estimate,
    monte_carlo_sweep,
    reduced_output_map,
    run_to_frame,
    simulate_run,
    steady_state_error,
    write_run_csv,
)
from obsvkit_errors import InvalidMatrix, MissingCertificate, NumericalInconsistency, RankDeficientRegressor
from observability import observable_decomposition, transition
from system_model import SamplingSequence, TimeDomain


@pytest.fixture
def x0():
    return np.array([1.0, -0.5, 2.0, 0.3])


def _outputs(sys_, x0, times):
    return np.array([sys_.C @ transition(sys_.A, t, sys_.is_discrete) @ x0 for t in times])


class TestRegressor:
    """Test regressor assembly and least-squares recovery."""

    @pytest.mark.unit
    def test_recovers_observable_state(self, example_system, x0):
        """Noise-free outputs give back the state at the window's first sample."""
        d = observable_decomposition(example_system.A, example_system.C)
        window = SamplingSequence((3, 4, 7), TimeDomain.DISCRETE)
        reg = build_regressor(d, window, _outputs(example_system, x0, window.times))
        assert reg.Phi.shape == (9, 4)
        assert reg.rank.rank == 4
        assert reg.relative_times == (0, 1, 4)
        x_hat = estimate_state(reg)
        x_at_base = transition(example_system.A, 3, True) @ x0
        assert np.allclose(x_hat, d.to_observable(x_at_base))

    @pytest.mark.unit
    def test_rank_deficient_window(self, counterexample_system):
        """A pathological window raises with the window attached."""
        d = observable_decomposition(counterexample_system.A, counterexample_system.C)
        window = refs.counterexample_schedule("pathological")
        with pytest.raises(RankDeficientRegressor) as excinfo:
            build_regressor(d, window, np.zeros((4, 1)))
        assert excinfo.value.window == [2, 6, 10, 14]
        assert excinfo.value.rank_result.rank == 2

    @pytest.mark.unit
    def test_output_shape_checked(self, example_system):
        d = observable_decomposition(example_system.A, example_system.C)
        window = SamplingSequence((0, 1), TimeDomain.DISCRETE)
        with pytest.raises(InvalidMatrix):
            build_regressor(d, window, np.zeros((3, 3)))

    @pytest.mark.unit
    def test_functional_estimate(self, example_system, x0):
        d = observable_decomposition(example_system.A, example_system.C)
        z = functional_estimate(d, example_system.F, d.to_observable(x0), dt=2)
        expected = example_system.F @ np.linalg.matrix_power(example_system.A, 2) @ x0
        assert np.allclose(z, expected)


class TestReducedEstimator:
    """Test the certificate-based reduced estimator."""

    @pytest.mark.unit
    def test_reduced_output_map_shape(self, example_system, example_certificate):
        alpha, _ = example_certificate
        d_F = observable_decomposition(example_system.A, example_system.F)
        H = reduced_output_map(alpha, d_F, example_system.C)
        assert H.shape == (1, 2)

    @pytest.mark.unit
    def test_leaking_alpha_rejected(self, example_system):
        d_F = observable_decomposition(example_system.A, example_system.F)
        with pytest.raises(NumericalInconsistency):
            reduced_output_map(np.array([[1.0, 0.0, 0.0]]), d_F, example_system.C)

    @pytest.mark.unit
    def test_reduced_regressor_recovers_functional(self, example_system, example_certificate, x0):
        d_F = observable_decomposition(example_system.A, example_system.F)
        window = SamplingSequence((4, 7), TimeDomain.DISCRETE)
        reg = build_reduced_regressor(example_certificate, d_F, example_system.C, window,
                                      _outputs(example_system, x0, window.times))
        assert reg.Phi.shape == (2, 2)
        xi_hat = estimate_state(reg)
        z_hat = d_F.restrict(example_system.F) @ xi_hat
        assert np.allclose(z_hat, example_system.F @ np.linalg.matrix_power(example_system.A, 4) @ x0)

    @pytest.mark.unit
    def test_reduced_regressor_needs_certificate(self, example_system):
        d_F = observable_decomposition(example_system.A, example_system.F)
        with pytest.raises(MissingCertificate):
            build_reduced_regressor(None, d_F, example_system.C, SamplingSequence((0, 1), TimeDomain.DISCRETE),
                                    np.zeros((2, 3)))


class TestSimulateRun:
    """Test sliding-window simulation runs."""

    @pytest.mark.unit
    def test_noise_free_full_run_is_exact(self, example_system, example_schedule, x0):
        run = simulate_run(example_system, x0, example_schedule, window=4)
        assert run.first_window_time == example_schedule.times[3]
        assert float(run.post_window_errors().max()) < 1e-6
        assert run.error_trace[0] > 0.0

    @pytest.mark.unit
    def test_reduced_matches_full(self, example_system, example_schedule, example_certificate, x0):
        full = simulate_run(example_system, x0, example_schedule, window=4, mode="full")
        reduced = simulate_run(example_system, x0, example_schedule, window=4, mode="reduced",
                               certificate=example_certificate)
        mask = full.query_times >= full.first_window_time
        assert np.allclose(full.estimates[mask], reduced.estimates[mask], atol=1e-8)

    @pytest.mark.unit
    def test_prior_equal_to_truth(self, example_system, example_schedule, x0):
        """Propagating an exact prior gives zero error before the first window."""
        run = simulate_run(example_system, x0, example_schedule, window=4, prior=x0)
        assert float(run.error_trace.max()) < 1e-6

    @pytest.mark.unit
    def test_noisy_run(self, example_system, example_schedule, example_certificate, x0):
        run = simulate_run(example_system, x0, example_schedule, window=4, noise_bound=0.001, seed=3,
                           mode="reduced", certificate=example_certificate)
        error = steady_state_error(run)
        assert 0.0 < error < float(run.error_trace[0])
        assert np.all(np.isfinite(run.estimates))

    @pytest.mark.unit
    def test_noise_is_seeded(self, example_system, example_schedule, x0):
        first = simulate_run(example_system, x0, example_schedule, window=4, noise_bound=0.1, seed=9)
        second = simulate_run(example_system, x0, example_schedule, window=4, noise_bound=0.1, seed=9)
        assert np.array_equal(first.estimates, second.estimates)

    @pytest.mark.unit
    def test_rank_deficient_schedule(self, counterexample_system):
        with pytest.raises(RankDeficientRegressor):
            simulate_run(counterexample_system, np.ones(4), refs.counterexample_schedule("pathological"), window=4)

    @pytest.mark.unit
    def test_reduced_needs_certificate(self, example_system, example_schedule, x0):
        with pytest.raises(MissingCertificate):
            simulate_run(example_system, x0, example_schedule, window=2, mode="reduced")

    @pytest.mark.unit
    def test_too_few_samples(self, example_system, x0):
        """A schedule shorter than the window only propagates the prior."""
        run = simulate_run(example_system, x0, SamplingSequence((0, 1), TimeDomain.DISCRETE), window=4)
        assert run.first_window_time is None
        assert any("fewer than 4 samples" in note for note in run.notes)
        with pytest.raises(ValueError):
            steady_state_error(run)

    @pytest.mark.unit
    def test_custom_query_times(self, example_system, example_schedule, x0):
        run = simulate_run(example_system, x0, example_schedule, window=4, query_times=[10, 20])
        assert list(run.query_times) == [10, 20]
        assert run.estimates.shape == (2, 1)

    @pytest.mark.unit
    @pytest.mark.parametrize("kwargs", [{"mode": "hybrid"}, {"window": 0}, {"noise_bound": -1.0}])
    def test_invalid_arguments(self, example_system, example_schedule, x0, kwargs):
        args = {"window": 4, **kwargs}
        with pytest.raises(ValueError):
            simulate_run(example_system, x0, example_schedule, **args)

    @pytest.mark.unit
    def test_wrong_initial_state(self, example_system, example_schedule):
        with pytest.raises(InvalidMatrix):
            simulate_run(example_system, np.ones(3), example_schedule, window=4)

    @pytest.mark.unit
    def test_continuous_run(self, oscillator_system):
        seq = SamplingSequence((0.3, 1.1, 2.0, 2.9), TimeDomain.CONTINUOUS)
        run = simulate_run(oscillator_system, np.array([1.0, -1.0]), seq, window=2, horizon=5.0)
        assert len(run.query_times) == 201
        assert run.first_window_time == pytest.approx(1.1)
        assert float(run.post_window_errors().max()) < 1e-8

    @pytest.mark.unit
    def test_summary(self, example_system, example_schedule, x0):
        summary = simulate_run(example_system, x0, example_schedule, window=4).summary()
        assert summary["mode"] == "full"
        assert summary["samples"] == len(example_schedule)
        assert summary["steady_state_median_error"] < 1e-6


class TestExports:
    """Test pandas exports and the Monte-Carlo sweep."""

    @pytest.mark.unit
    def test_run_to_frame(self, example_system, example_schedule, x0):
        run = simulate_run(example_system, x0, example_schedule, window=4)
        frame = run_to_frame(run)
        assert list(frame.columns) == ["time", "z_true", "z_hat", "abs_error"]
        assert len(frame) == len(run.query_times)
        assert np.allclose(frame["abs_error"], np.abs(frame["z_true"] - frame["z_hat"]))

    @pytest.mark.unit
    def test_write_run_csv(self, example_system, example_schedule, x0, tmp_path):
        run = simulate_run(example_system, x0, example_schedule, window=4)
        path = tmp_path / "run.csv"
        write_run_csv(run, str(path))
        text = path.read_text()
        assert text.startswith("time,z_true,z_hat,abs_error\n")
        assert "\r" not in text
        assert len(pd.read_csv(path)) == len(run.query_times)

    @pytest.mark.unit
    def test_monte_carlo_sweep(self, example_system, example_schedule, x0):
        frame = monte_carlo_sweep(example_system, x0, example_schedule, 4, noise_bounds=[0.0, 0.1],
                                  seeds=[1, 2, 3])
        assert list(frame.columns) == ["noise_bound", "seed", "steady_state_error",
                                       "max_post_window_error", "initial_error"]
        assert list(frame["noise_bound"]) == [0.0, 0.0, 0.0, 0.1, 0.1, 0.1]
        assert list(frame["seed"]) == [1, 2, 3, 1, 2, 3]
        assert (frame.loc[frame["noise_bound"] == 0.0, "steady_state_error"] < 1e-6).all()
        assert (frame.loc[frame["noise_bound"] == 0.1, "steady_state_error"] > 0.0).all()
