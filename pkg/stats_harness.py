#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Monte Carlo experiments under the multiplicative noise model

Y^j = Delta^j T(h*) U^j with mean-one diagonal noise Delta independent of U.

- Synthetic batches with separate input and noise random streams
- Consistency: estimation error shrinks as the number of experiments m grows
- sqrt(m) normality screen of the estimation error
- Decomposition of the limit criterion E I(Y||T(h)U)
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union
import logging

import numpy as np
from pydantic import ValidationError
from scipy.special import digamma, kl_div, xlogy
from scipy.stats import kurtosis, skew

from config_models import (
    InputLaw,
    NoiseFamily,
    NoiseModel,
    SolverConfig,
    experiment_solver_config,
)
from exceptions import ConfigError, DomainError, PreconditionError
from fir_operator import ConvolutionSystem
from nonneg_core import rescale_problem
from replicate_strategies import ReplicateStrategy, SequentialStrategy
from solver import solve

logger = logging.getLogger(__name__)

BOUNDARY_RELATIVE = 1e-6
DEGENERATE_SCALE = 1e-3
MEAN_STANDARD_ERRORS = 4.0
COVARIANCE_RTOL = 0.30
MAX_SKEWNESS = 0.5
MAX_EXCESS_KURTOSIS = 1.0
DECOMPOSITION_STANDARD_ERRORS = 3.0


def as_noise_model(noise: Union[NoiseModel, Dict, None]) -> NoiseModel:
    """
    Raises:
        ConfigError: parameters that break the mean-one construction
    """
    if noise is None:
        return NoiseModel()
    if isinstance(noise, NoiseModel):
        return noise
    try:
        return NoiseModel(**noise)
    except ValidationError as e:
        raise ConfigError(f"invalid noise model: {e}")


def as_input_law(law: Union[InputLaw, Dict, None]) -> InputLaw:
    if law is None:
        return InputLaw()
    if isinstance(law, InputLaw):
        return law
    try:
        return InputLaw(**law)
    except ValidationError as e:
        raise ConfigError(f"invalid input law: {e}")


def _two_point_low_probability(noise: NoiseModel) -> float:
    return (noise.high - 1.0) / (noise.high - noise.low)


def draw_noise(noise: NoiseModel, size, rng: np.random.Generator) -> np.ndarray:
    """Nonnegative mean-one noise samples"""
    if noise.distribution == NoiseFamily.GAMMA:
        return rng.gamma(shape=noise.shape, scale=1.0 / noise.shape, size=size)
    if noise.distribution == NoiseFamily.LOGNORMAL:
        return rng.lognormal(mean=-0.5 * noise.sigma**2, sigma=noise.sigma, size=size)
    if noise.distribution == NoiseFamily.TWO_POINT:
        low = rng.random(size) < _two_point_low_probability(noise)
        return np.where(low, noise.low, noise.high)
    return np.ones(size)


def noise_variance(noise: NoiseModel) -> float:
    if noise.distribution == NoiseFamily.GAMMA:
        return 1.0 / noise.shape
    if noise.distribution == NoiseFamily.LOGNORMAL:
        return float(np.expm1(noise.sigma**2))
    if noise.distribution == NoiseFamily.TWO_POINT:
        return (1.0 - noise.low) * (noise.high - 1.0)
    return 0.0


def expected_delta_log_delta(noise: NoiseModel) -> float:
    """Closed form of E[delta log delta]"""
    if noise.distribution == NoiseFamily.GAMMA:
        return float(digamma(noise.shape + 1.0) - np.log(noise.shape))
    if noise.distribution == NoiseFamily.LOGNORMAL:
        return 0.5 * noise.sigma**2
    if noise.distribution == NoiseFamily.TWO_POINT:
        p_low = _two_point_low_probability(noise)
        return float(
            p_low * xlogy(noise.low, noise.low) + (1.0 - p_low) * xlogy(noise.high, noise.high)
        )
    return 0.0


def sample_inputs(law: InputLaw, rows: int, m: int, rng: np.random.Generator) -> np.ndarray:
    """I.i.d. uniform inputs; row 0 is never zeroed so U_0 >= law.low > 0"""
    U = rng.uniform(law.low, law.high, size=(rows, m))
    if law.zero_probability > 0 and rows > 1:
        zeros = rng.random((rows - 1, m)) < law.zero_probability
        U[1:][zeros] = 0.0
    return U


@dataclass
class ExperimentBatch:
    h_true: np.ndarray
    U: np.ndarray
    Y: np.ndarray
    seed: int
    replicate: int
    noise: NoiseModel

    @property
    def m(self) -> int:
        return self.U.shape[1]


def _validate_h_true(h_true) -> np.ndarray:
    h = np.array(h_true, dtype=np.float64).reshape(-1)
    if h.size == 0 or not np.all(np.isfinite(h)) or np.any(h <= 0):
        raise ConfigError("h_true must be an interior point with all components > 0")
    return h


def _streams(seed: int, m: int, replicate: int) -> Tuple[np.random.Generator, np.random.Generator]:
    """Independent input and noise generators for one (m, replicate) cell"""
    inputs, noise = np.random.SeedSequence(seed, spawn_key=(m, replicate)).spawn(2)
    return np.random.default_rng(inputs), np.random.default_rng(noise)


def generate_batch(
    h_true,
    input_law: Union[InputLaw, Dict, None],
    noise: Union[NoiseModel, Dict, None],
    m: int,
    seed: int,
    replicate: int = 0,
) -> ExperimentBatch:
    """
    Draw m experiments Y^j = Delta^j T(h_true) U^j

    The same (seed, m, replicate) always gives the same batch.

    Raises:
        ConfigError: invalid noise or input law, h_true not interior, m < 1
    """
    h = _validate_h_true(h_true)
    noise = as_noise_model(noise)
    law = as_input_law(input_law)
    if m < 1:
        raise ConfigError("m must be at least 1")
    input_rng, noise_rng = _streams(seed, m, replicate)
    U = sample_inputs(law, h.size, m, input_rng)
    delta = draw_noise(noise, U.shape, noise_rng)
    Y = delta * np.asarray(ConvolutionSystem(U).apply(h))
    return ExperimentBatch(h_true=h, U=U, Y=Y, seed=seed, replicate=replicate, noise=noise)


@dataclass
class ReplicateOutcome:
    """Result of one estimation; falsy when the solve failed"""

    m: int
    replicate: int
    h_hat: Optional[np.ndarray] = None
    error: Optional[float] = None
    termination: Optional[str] = None
    message: Optional[str] = None

    def __bool__(self) -> bool:
        return self.h_hat is not None


def estimate(batch: ExperimentBatch, config: Optional[SolverConfig] = None) -> ReplicateOutcome:
    """Solve the batch on the unit-mass scale; failures become a falsy outcome"""
    config = config or experiment_solver_config()
    try:
        Y, U, _ = rescale_problem(batch.Y, batch.U)
        report = solve(Y, U, config)
    except PreconditionError as e:
        logger.warning(f"replicate m={batch.m} #{batch.replicate} failed: {e}")
        return ReplicateOutcome(m=batch.m, replicate=batch.replicate, message=str(e))
    h_hat = np.array(report.h_final)
    return ReplicateOutcome(
        m=batch.m,
        replicate=batch.replicate,
        h_hat=h_hat,
        error=float(np.linalg.norm(h_hat - batch.h_true)),
        termination=report.termination.value,
    )


def _replicate_task(h_true, law, noise, m, seed, replicate, config):
    def task() -> ReplicateOutcome:
        batch = generate_batch(h_true, law, noise, m, seed, replicate)
        return estimate(batch, config)

    return task


@dataclass
class ConsistencyCurve:
    """Estimation errors per sample size m (None marks a failed replicate)"""

    m_grid: List[int]
    errors: List[List[Optional[float]]]
    replicates: int
    missing: List[Dict] = field(default_factory=list)

    def median_errors(self) -> List[float]:
        medians = []
        for row in self.errors:
            values = sorted(e for e in row if e is not None)
            medians.append(float(np.median(values)) if values else float("nan"))
        return medians

    def inversions(self) -> int:
        medians = self.median_errors()
        return sum(1 for a, b in zip(medians, medians[1:]) if b > a)

    def trend_holds(self) -> bool:
        """Medians nonincreasing up to one inversion, halving over a 16-fold range of m"""
        medians = self.median_errors()
        if any(np.isnan(medians)):
            return False
        if self.inversions() > 1:
            return False
        if self.m_grid[-1] >= 16 * self.m_grid[0]:
            return medians[-1] * 2.0 <= medians[0]
        return True

    def to_dict(self) -> Dict:
        return {
            "m_grid": list(self.m_grid),
            "replicates": self.replicates,
            "errors": [list(row) for row in self.errors],
            "median_errors": self.median_errors(),
            "trend_holds": self.trend_holds(),
            "missing": list(self.missing),
        }


def _run_grid(
    h_true,
    input_law,
    noise,
    sizes: Sequence[int],
    replicates: int,
    seed: int,
    config: Optional[SolverConfig],
    strategy: Optional[ReplicateStrategy],
    label: str,
) -> List[List[ReplicateOutcome]]:
    h = _validate_h_true(h_true)
    noise = as_noise_model(noise)
    law = as_input_law(input_law)
    strategy = strategy or SequentialStrategy()
    config = config or experiment_solver_config()
    tasks = [
        _replicate_task(h, law, noise, m, seed, r, config)
        for m in sizes
        for r in range(replicates)
    ]
    flat = strategy.run(tasks, label=label)
    return [flat[i * replicates : (i + 1) * replicates] for i in range(len(sizes))]


def consistency_experiment(
    h_true,
    input_law,
    noise,
    m_grid: Sequence[int],
    replicates: int,
    seed: int,
    config: Optional[SolverConfig] = None,
    strategy: Optional[ReplicateStrategy] = None,
) -> ConsistencyCurve:
    """Record ||h_hat^m - h*||_2 for every m in m_grid and every replicate"""
    m_grid = [int(m) for m in m_grid]
    if any(b <= a for a, b in zip(m_grid, m_grid[1:])):
        raise ConfigError("m_grid must be strictly increasing")
    logger.info(f"Consistency experiment: m_grid={m_grid}, replicates={replicates}")
    outcomes = _run_grid(
        h_true, input_law, noise, m_grid, replicates, seed, config, strategy, "consistency"
    )
    errors = [[o.error if o else None for o in row] for row in outcomes]
    missing = [
        {"m": o.m, "replicate": o.replicate, "message": o.message}
        for row in outcomes
        for o in row
        if not o
    ]
    curve = ConsistencyCurve(m_grid=m_grid, errors=errors, replicates=replicates, missing=missing)
    logger.info(f"Median errors: {curve.median_errors()}")
    return curve


@dataclass
class NormalityResult:
    """sqrt(m)-scaled estimation errors and the three screens applied to them"""

    m: int
    replicates: int
    scaled_errors: np.ndarray
    scaled_errors_large: np.ndarray
    excluded_boundary: int
    missing: int
    degenerate: bool
    mean: np.ndarray
    standard_errors: np.ndarray
    mean_ok: bool
    covariance: np.ndarray
    covariance_large: np.ndarray
    covariance_difference: float
    covariance_ok: bool
    skewness: np.ndarray
    excess_kurtosis: np.ndarray
    normality_ok: bool

    @property
    def passed(self) -> bool:
        return self.mean_ok and self.covariance_ok and self.normality_ok

    def to_dict(self) -> Dict:
        return {
            "m": self.m,
            "replicates": self.replicates,
            "scaled_errors": self.scaled_errors.tolist(),
            "excluded_boundary": self.excluded_boundary,
            "missing": self.missing,
            "degenerate": self.degenerate,
            "mean": self.mean.tolist(),
            "standard_errors": self.standard_errors.tolist(),
            "mean_ok": self.mean_ok,
            "covariance": self.covariance.tolist(),
            "covariance_large": self.covariance_large.tolist(),
            "covariance_difference": self.covariance_difference,
            "covariance_ok": self.covariance_ok,
            "skewness": self.skewness.tolist(),
            "excess_kurtosis": self.excess_kurtosis.tolist(),
            "normality_ok": self.normality_ok,
            "passed": self.passed,
        }


def _scaled_sample(outcomes: List[ReplicateOutcome], h: np.ndarray) -> Tuple[np.ndarray, int, int]:
    """sqrt(m)(h_hat - h*) for interior replicates, with excluded and missing counts"""
    rows = []
    excluded = missing = 0
    for outcome in outcomes:
        if not outcome:
            missing += 1
            continue
        h_hat = outcome.h_hat
        if np.any(h_hat < BOUNDARY_RELATIVE * np.linalg.norm(h_hat)):
            excluded += 1
            continue
        rows.append(np.sqrt(outcome.m) * (h_hat - h))
    if excluded:
        logger.warning(f"Excluded {excluded} boundary replicates")
    sample = np.array(rows) if rows else np.zeros((0, h.size))
    return sample, excluded, missing


def _covariance(sample: np.ndarray) -> np.ndarray:
    if sample.shape[0] < 2:
        return np.zeros((sample.shape[1], sample.shape[1]))
    return np.atleast_2d(np.cov(sample, rowvar=False))


def normality_experiment(
    h_true,
    input_law,
    noise,
    m: int = 1024,
    replicates: int = 500,
    seed: int = 0,
    config: Optional[SolverConfig] = None,
    strategy: Optional[ReplicateStrategy] = None,
    scale_factor: int = 4,
) -> NormalityResult:
    """
    Sample sqrt(m)(h_hat^m - h*) and screen it

    (a) componentwise mean within 4 standard errors of zero
    (b) sample covariance at m and at scale_factor * m within 30% (relative Frobenius)
    (c) standardized components: |skewness| < 0.5 and |excess kurtosis| < 1

    Replicates touching the boundary (some h_hat_k < 1e-6 ||h_hat||) are excluded
    and counted. A sample whose entries are all within 1e-3 of zero is
    degenerate (noiseless data) and passes every screen.
    """
    h = _validate_h_true(h_true)
    logger.info(f"Normality experiment: m={m} and {scale_factor * m}, replicates={replicates}")
    small, large = _run_grid(
        h, input_law, noise, [m, scale_factor * m], replicates, seed, config, strategy, "normality"
    )
    sample, excluded, missing = _scaled_sample(small, h)
    sample_large, excluded_large, missing_large = _scaled_sample(large, h)
    count = sample.shape[0]

    degenerate = bool(
        np.all(np.abs(sample) <= DEGENERATE_SCALE)
        and np.all(np.abs(sample_large) <= DEGENERATE_SCALE)
    )
    mean = sample.mean(axis=0) if count else np.zeros(h.size)
    spread = sample.std(axis=0, ddof=1) if count > 1 else np.zeros(h.size)
    standard_errors = spread / np.sqrt(max(count, 1))
    covariance = _covariance(sample)
    covariance_large = _covariance(sample_large)
    norm = float(np.linalg.norm(covariance))
    difference = float(np.linalg.norm(covariance - covariance_large)) / norm if norm > 0 else 0.0

    if degenerate:
        skewness = np.zeros(h.size)
        excess = np.zeros(h.size)
        mean_ok = covariance_ok = normality_ok = True
    else:
        mean_ok = bool(np.all(np.abs(mean) <= MEAN_STANDARD_ERRORS * standard_errors))
        covariance_ok = difference <= COVARIANCE_RTOL
        skewness = np.asarray(skew(sample, axis=0))
        excess = np.asarray(kurtosis(sample, axis=0, fisher=True))
        normality_ok = bool(
            np.all(np.abs(skewness) < MAX_SKEWNESS) and np.all(np.abs(excess) < MAX_EXCESS_KURTOSIS)
        )

    return NormalityResult(
        m=m,
        replicates=replicates,
        scaled_errors=sample,
        scaled_errors_large=sample_large,
        excluded_boundary=excluded + excluded_large,
        missing=missing + missing_large,
        degenerate=degenerate,
        mean=mean,
        standard_errors=standard_errors,
        mean_ok=mean_ok,
        covariance=covariance,
        covariance_large=covariance_large,
        covariance_difference=difference,
        covariance_ok=covariance_ok,
        skewness=skewness,
        excess_kurtosis=excess,
        normality_ok=normality_ok,
    )


@dataclass
class DecompositionCheck:
    """Both sides of E I(Y||T(h)U) = E I(T(h*)U||T(h)U) + sum E(T(h*)U) E[delta log delta]"""

    lhs: float
    rhs: float
    residual: float
    standard_error: float
    expected_delta_log_delta: float
    samples: int

    @property
    def passed(self) -> bool:
        band = DECOMPOSITION_STANDARD_ERRORS * self.standard_error
        return abs(self.residual) <= band + 1e-12 * (1.0 + abs(self.lhs))

    def to_dict(self) -> Dict:
        return {
            "lhs": self.lhs,
            "rhs": self.rhs,
            "residual": self.residual,
            "standard_error": self.standard_error,
            "expected_delta_log_delta": self.expected_delta_log_delta,
            "samples": self.samples,
            "passed": self.passed,
        }


def _column_divergences(M: np.ndarray, N: np.ndarray) -> np.ndarray:
    """I-divergence of each column; kl_div is +inf where absolute continuity fails"""
    return np.sum(kl_div(M, N), axis=0)


def limit_criterion_decomposition_check(
    h_true,
    input_law,
    noise,
    h_probe,
    mc_samples: int,
    seed: int = 0,
) -> DecompositionCheck:
    """
    Monte Carlo check of the decomposition of the limit criterion at h_probe

    Each sample is one experiment; both sides are evaluated on the same
    draws and the residual is the mean of their per-sample difference.

    Raises:
        DomainError: T(h_probe)U misses the support of the noiseless output
    """
    noise = as_noise_model(noise)
    batch = generate_batch(h_true, input_law, noise, mc_samples, seed)
    system = ConvolutionSystem(batch.U)
    probe = np.array(h_probe, dtype=np.float64).reshape(-1)
    noiseless = np.asarray(system.apply(batch.h_true))
    fitted = np.asarray(system.apply(probe))

    lhs = _column_divergences(batch.Y, fitted)
    first = _column_divergences(noiseless, fitted)
    if not (np.all(np.isfinite(lhs)) and np.all(np.isfinite(first))):
        raise DomainError("I(T(h*)U||T(h_probe)U) is infinite for some samples")
    entropy = expected_delta_log_delta(noise)
    second = noiseless.sum(axis=0) * entropy
    difference = lhs - first - second
    standard_error = float(difference.std(ddof=1) / np.sqrt(mc_samples)) if mc_samples > 1 else 0.0
    result = DecompositionCheck(
        lhs=float(lhs.mean()),
        rhs=float(first.mean() + second.mean()),
        residual=float(difference.mean()),
        standard_error=standard_error,
        expected_delta_log_delta=entropy,
        samples=mc_samples,
    )
    logger.info(
        f"Decomposition check: residual={result.residual:.3g}, "
        f"se={result.standard_error:.3g}, passed={result.passed}"
    )
    return result
