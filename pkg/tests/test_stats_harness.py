"""Tests for the Monte Carlo experiments"""

import numpy as np
import pytest

from config_models import InputLaw, NoiseFamily, NoiseModel, SolverConfig
from exceptions import ConfigError, DomainError
from fir_operator import ConvolutionSystem
from replicate_strategies import ParallelStrategy
from stats_harness import (
    ConsistencyCurve,
    ExperimentBatch,
    as_noise_model,
    consistency_experiment,
    draw_noise,
    estimate,
    expected_delta_log_delta,
    generate_batch,
    limit_criterion_decomposition_check,
    noise_variance,
    normality_experiment,
    sample_inputs,
)

H_TRUE = [1.0, 0.5, 0.25]
WELL_CONDITIONED = {"low": 0.5, "high": 1.0}
NOISELESS = {"distribution": "point_mass"}
FAMILIES = [
    NoiseModel(distribution=NoiseFamily.GAMMA, shape=4.0),
    NoiseModel(distribution=NoiseFamily.LOGNORMAL, sigma=0.5),
    NoiseModel(distribution=NoiseFamily.TWO_POINT, low=0.5, high=2.0),
]


class TestNoise:
    """Test the mean-one noise families"""

    @pytest.mark.parametrize("noise", FAMILIES, ids=lambda n: n.distribution.value)
    def test_mean_one(self, noise):
        """Test that each family has mean one"""
        rng = np.random.default_rng(7)
        samples = draw_noise(noise, 200_000, rng)
        standard_error = np.sqrt(noise_variance(noise) / samples.size)
        assert abs(samples.mean() - 1.0) <= 4 * standard_error
        assert np.all(samples >= 0)

    @pytest.mark.parametrize("noise", FAMILIES, ids=lambda n: n.distribution.value)
    def test_variance(self, noise):
        """Test the variance of each family"""
        rng = np.random.default_rng(8)
        samples = draw_noise(noise, 200_000, rng)
        assert samples.var() == pytest.approx(noise_variance(noise), rel=0.05)

    @pytest.mark.parametrize("noise", FAMILIES, ids=lambda n: n.distribution.value)
    def test_expected_delta_log_delta(self, noise):
        """Test E[delta log delta] against samples"""
        rng = np.random.default_rng(9)
        samples = draw_noise(noise, 200_000, rng)
        values = samples * np.log(samples)
        standard_error = values.std(ddof=1) / np.sqrt(values.size)
        assert abs(values.mean() - expected_delta_log_delta(noise)) <= 4 * standard_error

    def test_point_mass(self):
        """Test the point mass"""
        noise = NoiseModel(distribution=NoiseFamily.POINT_MASS)
        np.testing.assert_array_equal(draw_noise(noise, 5, np.random.default_rng(0)), 1.0)
        assert noise_variance(noise) == 0.0
        assert expected_delta_log_delta(noise) == 0.0

    def test_lognormal_closed_form(self):
        """Test that E[delta log delta] = sigma^2 / 2 for the lognormal"""
        assert expected_delta_log_delta(
            NoiseModel(distribution=NoiseFamily.LOGNORMAL, sigma=0.4)
        ) == pytest.approx(0.08)

    def test_invalid_two_point(self):
        """Test that an invalid two-point law is a configuration error"""
        with pytest.raises(ConfigError):
            as_noise_model({"distribution": "two_point_mean_one", "low": 1.2, "high": 2.0})

    def test_unknown_family(self):
        """Test that an unknown family is a configuration error"""
        with pytest.raises(ConfigError):
            as_noise_model({"distribution": "cauchy"})


class TestBatches:
    """Test synthetic experiment generation"""

    def test_shapes(self):
        """Test batch shapes"""
        batch = generate_batch(H_TRUE, None, None, m=12, seed=3)
        assert isinstance(batch, ExperimentBatch)
        assert batch.U.shape == batch.Y.shape == (3, 12)
        assert batch.m == 12

    def test_deterministic(self):
        """Test that a seed and replicate fix the batch"""
        first = generate_batch(H_TRUE, None, None, m=8, seed=5, replicate=2)
        second = generate_batch(H_TRUE, None, None, m=8, seed=5, replicate=2)
        np.testing.assert_array_equal(first.U, second.U)
        np.testing.assert_array_equal(first.Y, second.Y)

    def test_replicates_differ(self):
        """Test that replicates draw different data"""
        first = generate_batch(H_TRUE, None, None, m=8, seed=5, replicate=0)
        second = generate_batch(H_TRUE, None, None, m=8, seed=5, replicate=1)
        assert not np.array_equal(first.Y, second.Y)

    def test_noise_stream_independent_of_family(self):
        """Inputs come from their own stream, so changing the noise keeps U"""
        gamma = generate_batch(H_TRUE, None, {"distribution": "gamma_mean_one"}, m=8, seed=1)
        point = generate_batch(H_TRUE, None, NOISELESS, m=8, seed=1)
        np.testing.assert_array_equal(gamma.U, point.U)

    def test_point_mass_is_noiseless(self):
        """Test that point-mass noise gives Y = T(h)U"""
        batch = generate_batch(H_TRUE, None, NOISELESS, m=6, seed=0)
        np.testing.assert_array_equal(batch.Y, ConvolutionSystem(batch.U).apply(H_TRUE))

    def test_first_input_row_never_zeroed(self):
        """Test that only later input rows are zeroed"""
        law = InputLaw(zero_probability=0.9)
        U = sample_inputs(law, 4, 200, np.random.default_rng(0))
        assert np.all(U[0] >= law.low)
        assert np.any(U[1:] == 0)

    def test_h_true_must_be_interior(self):
        """Test that h_true must be strictly positive"""
        with pytest.raises(ConfigError):
            generate_batch([1.0, 0.0], None, None, m=4, seed=0)

    def test_m_positive(self):
        """Test that m must be positive"""
        with pytest.raises(ConfigError):
            generate_batch(H_TRUE, None, None, m=0, seed=0)


class TestEstimate:
    """Test single-replicate estimation"""

    def test_noiseless_recovery(self):
        """With delta = 1 the estimator returns h* for any m >= 1"""
        config = SolverConfig(tol_kkt=1e-10, record_history=False)
        for m in (1, 8, 32):
            batch = generate_batch(H_TRUE, WELL_CONDITIONED, NOISELESS, m=m, seed=m)
            outcome = estimate(batch, config)
            assert outcome
            assert outcome.error <= 1e-5

    def test_column_permutation_invariance(self):
        """Test that column order does not change the estimate"""
        batch = generate_batch(H_TRUE, None, None, m=30, seed=4)
        order = np.random.default_rng(0).permutation(30)
        shuffled = ExperimentBatch(
            h_true=batch.h_true,
            U=batch.U[:, order],
            Y=batch.Y[:, order],
            seed=batch.seed,
            replicate=batch.replicate,
            noise=batch.noise,
        )
        np.testing.assert_allclose(estimate(batch).h_hat, estimate(shuffled).h_hat, atol=1e-6)

    def test_failure_becomes_falsy_outcome(self):
        """Outputs before any input violate Condition 1"""
        batch = generate_batch(H_TRUE, None, None, m=3, seed=0)
        U = batch.U.copy()
        U[0, 0] = 0.0
        broken = ExperimentBatch(batch.h_true, U, batch.Y, 0, 0, batch.noise)
        outcome = estimate(broken)
        assert not outcome
        assert outcome.message


class TestConsistency:
    """Test the consistency experiment"""

    def test_structure(self):
        """Test the shape of a consistency curve"""
        curve = consistency_experiment(H_TRUE, None, None, m_grid=[8, 32], replicates=3, seed=1)
        assert curve.m_grid == [8, 32]
        assert len(curve.errors) == 2
        assert all(len(row) == 3 for row in curve.errors)
        assert all(e is not None and e >= 0 for row in curve.errors for e in row)
        assert set(curve.to_dict()) >= {"median_errors", "trend_holds", "missing"}

    def test_deterministic_and_thread_independent(self):
        """Test that threads do not change the errors"""
        sequential = consistency_experiment(H_TRUE, None, None, [8, 16], replicates=4, seed=2)
        parallel = consistency_experiment(
            H_TRUE, None, None, [8, 16], replicates=4, seed=2, strategy=ParallelStrategy(3)
        )
        assert sequential.errors == parallel.errors

    def test_noiseless_errors_vanish(self):
        """Test that noiseless errors vanish"""
        curve = consistency_experiment(
            H_TRUE, WELL_CONDITIONED, NOISELESS, [4, 16], replicates=2, seed=0
        )
        assert max(e for row in curve.errors for e in row) <= 1e-4

    def test_grid_must_increase(self):
        """Test that the m grid must increase"""
        with pytest.raises(ConfigError):
            consistency_experiment(H_TRUE, None, None, [16, 8], replicates=1, seed=0)

    def test_trend_rules(self):
        """Test the rules for a decreasing trend"""
        falling = ConsistencyCurve(m_grid=[16, 256], errors=[[0.4, 0.5], [0.1, 0.1]], replicates=2)
        assert falling.trend_holds()
        flat = ConsistencyCurve(m_grid=[16, 256], errors=[[0.4], [0.3]], replicates=1)
        assert not flat.trend_holds()
        bumpy = ConsistencyCurve(
            m_grid=[1, 2, 3, 4], errors=[[0.4], [0.5], [0.3], [0.35]], replicates=1
        )
        assert bumpy.inversions() == 2
        assert not bumpy.trend_holds()
        missing = ConsistencyCurve(m_grid=[1, 2], errors=[[None], [0.1]], replicates=1)
        assert not missing.trend_holds()

    @pytest.mark.slow
    def test_error_shrinks_with_m(self):
        """Test that the median error shrinks as m grows"""
        curve = consistency_experiment(
            H_TRUE,
            None,
            {"distribution": "gamma_mean_one", "shape": 4.0},
            m_grid=[16, 64, 256, 1024],
            replicates=20,
            seed=0,
        )
        assert curve.trend_holds(), curve.median_errors()


class TestNormality:
    """Test the sqrt(m) normality screen"""

    def test_noiseless_sample_is_degenerate(self):
        """Test that noiseless estimates form a degenerate sample"""
        result = normality_experiment(
            H_TRUE, WELL_CONDITIONED, NOISELESS, m=16, replicates=4, seed=0
        )
        assert result.degenerate
        assert result.passed
        assert result.scaled_errors.shape == (4, 3)

    def test_to_dict(self):
        """Test serializing a normality result"""
        result = normality_experiment(
            H_TRUE, WELL_CONDITIONED, NOISELESS, m=8, replicates=3, seed=0
        )
        data = result.to_dict()
        assert data["passed"] is True
        assert len(data["scaled_errors"]) == 3

    @pytest.mark.slow
    def test_gamma_noise(self):
        """Test the normality screen under gamma noise"""
        result = normality_experiment(
            H_TRUE,
            None,
            {"distribution": "gamma_mean_one", "shape": 4.0},
            m=1024,
            replicates=500,
            seed=0,
            strategy=ParallelStrategy(4),
        )
        assert result.excluded_boundary == 0
        assert result.passed, result.to_dict()


class TestDecomposition:
    """Test the decomposition of the limit criterion"""

    @pytest.mark.parametrize("noise", FAMILIES, ids=lambda n: n.distribution.value)
    def test_identity_holds(self, noise):
        """Test the decomposition for each noise family"""
        check = limit_criterion_decomposition_check(
            H_TRUE, None, noise, h_probe=[0.5, 0.25, 0.125], mc_samples=100_000, seed=0
        )
        assert check.passed, check.to_dict()
        assert check.expected_delta_log_delta == pytest.approx(expected_delta_log_delta(noise))

    def test_at_true_response(self):
        """At h = h* the first term vanishes"""
        noise = FAMILIES[0]
        check = limit_criterion_decomposition_check(
            H_TRUE, None, noise, h_probe=H_TRUE, mc_samples=50_000, seed=3
        )
        batch = generate_batch(H_TRUE, None, noise, 50_000, 3)
        mass = np.asarray(ConvolutionSystem(batch.U).apply(H_TRUE)).sum(axis=0).mean()
        assert check.passed
        assert check.rhs == pytest.approx(check.expected_delta_log_delta * mass, rel=1e-12)

    def test_point_mass_is_exact(self):
        """Test that the decomposition is exact without noise"""
        check = limit_criterion_decomposition_check(
            H_TRUE, None, NOISELESS, [0.5, 0.5, 0.5], mc_samples=1000
        )
        assert check.residual == 0.0
        assert check.passed

    def test_evaluation_point_outside_domain(self):
        """Test that an evaluation point with infinite F is rejected"""
        with pytest.raises(DomainError):
            limit_criterion_decomposition_check(
                H_TRUE, None, None, h_probe=[0.0, 1.0, 1.0], mc_samples=100
            )
