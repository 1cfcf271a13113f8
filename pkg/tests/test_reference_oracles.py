"""Tests for closed-form, brute-force and convergence-rate oracles"""

import numpy as np
import pytest

from config_models import SolverConfig
from diagnostics import objective
from exceptions import DegenerateDataError, InputError, InstanceSizeError, WellPosednessError
from fir_operator import ConvolutionSystem
from reference_oracles import (
    RateRegime,
    ToyCase,
    brute_force_minimize,
    rate_experiment,
    toy_closed_form,
)
from solver import solve, update_step
from tests.conftest import toy


def near_perfect_instance(rng, N, m):
    """Well-conditioned instance with mild noise, so the minimizer is interior"""
    U = rng.uniform(0.5, 1.5, size=(N + 1, m))
    U[0] = rng.uniform(2.0, 3.0, size=m)
    h = rng.uniform(0.5, 1.5, size=N + 1)
    Y = np.asarray(ConvolutionSystem(U).apply(h)) * rng.gamma(50.0, 1.0 / 50.0, size=(N + 1, m))
    return Y, U


class TestToyClosedForm:
    """Test the single-lag closed-form minimizer"""

    def test_interior(self):
        """Test the interior case"""
        solution = toy_closed_form(1.0, 1.0, 1.0, 2.0)
        assert solution.case == ToyCase.INTERIOR
        np.testing.assert_allclose(solution.h_star, [1.0, 1.0])
        assert solution.objective_at_star == pytest.approx(0.0, abs=1e-15)
        assert solution.unique
        assert not solution.on_threshold

    def test_boundary(self):
        """Test the boundary case"""
        solution = toy_closed_form(1.0, 1.0, 2.0, 1.0)
        assert solution.case == ToyCase.BOUNDARY
        np.testing.assert_allclose(solution.h_star, [1.5, 0.0])
        assert solution.objective_at_star > 0

    def test_threshold(self):
        """Test the threshold case"""
        solution = toy_closed_form(1.0, 1.0, 1.0, 1.0)
        assert solution.case == ToyCase.INTERIOR
        np.testing.assert_allclose(solution.h_star, [1.0, 0.0])
        assert solution.on_threshold

    def test_not_unique_with_zero_output(self):
        """Test that y_0 = 0 loses uniqueness"""
        assert not toy_closed_form(1.0, 1.0, 0.0, 1.0).unique

    def test_zero_first_input(self):
        """Test that u_0 = 0 is degenerate"""
        with pytest.raises(DegenerateDataError):
            toy_closed_form(0.0, 1.0, 1.0, 1.0)

    def test_negative_data(self):
        """Test that negative data are rejected"""
        with pytest.raises(InputError):
            toy_closed_form(1.0, -1.0, 1.0, 1.0)

    def test_matches_solver(self, rng):
        """Test that the solver reaches the closed-form minimum"""
        for _ in range(20):
            u0, u1, y0, y1 = rng.uniform(0.5, 1.5, size=4)
            Y, U = toy(u0, u1, y0, y1)
            solution = toy_closed_form(u0, u1, y0, y1)
            report = solve(Y, U)
            assert report.objective == pytest.approx(
                solution.objective_at_star, rel=1e-6, abs=1e-9
            )


class TestBruteForce:
    """Test nested grid refinement on the probability simplex"""

    def test_toy_interior(self):
        """Test grid search on the interior toy"""
        Y, U = toy(1.0, 1.0, 1.0, 2.0)
        np.testing.assert_allclose(brute_force_minimize(Y, U), [1.0, 1.0], atol=1e-5)

    def test_toy_boundary(self):
        """The boundary point p = (1, 0) lies on every grid"""
        Y, U = toy(1.0, 1.0, 2.0, 1.0)
        np.testing.assert_allclose(brute_force_minimize(Y, U), [1.5, 0.0], atol=1e-12)

    def test_random_toys_match_closed_form(self, rng):
        """Test grid search against the closed form on random toys"""
        for _ in range(50):
            u0, u1, y0, y1 = rng.uniform(0.5, 1.5, size=4)
            Y, U = toy(u0, u1, y0, y1)
            h_grid = brute_force_minimize(Y, U, grid_depth=30)
            np.testing.assert_allclose(
                h_grid, toy_closed_form(u0, u1, y0, y1).h_star, atol=1e-5
            )

    def test_single_lag(self):
        """Test grid search with a single lag"""
        h = brute_force_minimize(np.array([[3.0, 5.0]]), np.array([[2.0, 1.0]]))
        np.testing.assert_allclose(h, [8.0 / 3.0])

    def test_zero_output(self):
        """Test that all-zero output gives h = 0"""
        np.testing.assert_array_equal(brute_force_minimize(np.zeros((3, 1)), np.ones((3, 1))), 0)

    def test_result_on_simplex(self, rng):
        """Test that the grid minimizer lies on the simplex"""
        Y, U = near_perfect_instance(rng, 2, 2)
        h = brute_force_minimize(Y, U)
        alpha_reversed = ConvolutionSystem(U).alpha_reversed
        assert float(h @ alpha_reversed) == pytest.approx(Y.sum(), rel=1e-12)

    def test_too_large(self):
        """Test that large instances are refused"""
        with pytest.raises(InstanceSizeError):
            brute_force_minimize(np.ones((5, 1)), np.ones((5, 1)))
        with pytest.raises(InstanceSizeError):
            brute_force_minimize(np.ones((2, 4)), np.ones((2, 4)))

    def test_even_points_rejected(self):
        """Test that an even number of grid points is rejected"""
        Y, U = toy(1.0, 1.0, 1.0, 2.0)
        with pytest.raises(InputError):
            brute_force_minimize(Y, U, points=10)

    def test_condition_1_failure(self):
        """Test that grid search needs Condition 1"""
        with pytest.raises(WellPosednessError):
            brute_force_minimize(np.array([[1.0], [1.0]]), np.array([[0.0], [1.0]]))

    def test_agrees_with_solver(self, rng):
        """Test that grid search and solver agree"""
        for _ in range(10):
            N = int(rng.integers(1, 4))
            m = int(rng.integers(2, 4))
            Y, U = near_perfect_instance(rng, N, m)
            h_grid = brute_force_minimize(Y, U, grid_depth=30)
            report = solve(Y, U, SolverConfig(tol_kkt=1e-10, record_history=False))
            assert report.objective <= objective(Y, U, h_grid) + 1e-6
            np.testing.assert_allclose(report.h_final, h_grid, atol=1e-4)

    def test_grid_minimum_is_fixed_point(self, rng):
        """The multiplicative update leaves the brute-force minimizer in place"""
        for _ in range(10):
            N = int(rng.integers(1, 4))
            m = int(rng.integers(1, 3))
            Y, U = near_perfect_instance(rng, N, m)
            h_grid = brute_force_minimize(Y, U, grid_depth=30)
            np.testing.assert_allclose(update_step(Y, U, h_grid), h_grid, atol=1e-4)

    @pytest.mark.slow
    def test_agrees_with_solver_many(self, rng):
        """Test agreement on many random instances"""
        for _ in range(50):
            N = int(rng.integers(1, 4))
            m = int(rng.integers(1, 4))
            Y, U = near_perfect_instance(rng, N, m)
            h_grid = brute_force_minimize(Y, U, grid_depth=30)
            report = solve(Y, U, SolverConfig(tol_kkt=1e-10, record_history=False))
            assert abs(report.objective - objective(Y, U, h_grid)) <= 1e-6


class TestRateExperiment:
    """Test the convergence-rate classification on single-lag problems"""

    def test_boundary_rate(self):
        """h_1^t shrinks by g_0 = 2/3 per step"""
        result = rate_experiment(1.0, 1.0, 2.0, 1.0, iters=200)
        assert result.case == ToyCase.BOUNDARY
        assert result.regime == RateRegime.EXPONENTIAL
        assert result.predicted_rate == pytest.approx(2.0 / 3.0)
        assert result.rate_matches(0.05)

    def test_strict_interior_rate(self):
        """Test the rate at a strict interior minimizer"""
        result = rate_experiment(1.0, 1.0, 1.0, 2.0, iters=2000)
        assert result.case == ToyCase.INTERIOR
        assert result.regime == RateRegime.EXPONENTIAL
        assert result.predicted_rate == pytest.approx(0.75)
        assert result.rate_matches(0.05)

    def test_threshold_is_one_over_t(self):
        """t h_1^t tends to y_1 (u_0 + u_1) / u_0^2 = 2"""
        result = rate_experiment(1.0, 1.0, 1.0, 1.0, iters=10_000)
        assert result.regime == RateRegime.ONE_OVER_T
        assert result.threshold_limit == pytest.approx(2.0)
        assert result.tail_matches(0.02)
        assert result.predicted_rate is None

    def test_trace_starts_at_initial_point(self):
        """Test that the traces start at the uniform-mass point"""
        result = rate_experiment(1.0, 1.0, 2.0, 1.0, iters=50)
        np.testing.assert_allclose(result.h_trace[0], [0.75, 1.5])
        assert result.residual_trace[0] == pytest.approx(1.5)

    def test_zero_output_rejected(self):
        """Test that y_1 = 0 is rejected"""
        with pytest.raises(DegenerateDataError):
            rate_experiment(1.0, 1.0, 1.0, 0.0)
