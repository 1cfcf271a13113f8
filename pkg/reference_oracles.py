#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Independent ground truth for the solver

- Closed-form minimizers of the single-lag, single-experiment toy problem
- Brute-force grid refinement over the simplex for small instances
- Convergence-rate experiments on the toy problem (exponential vs 1/t)
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Tuple
import logging

import numpy as np
from scipy.special import kl_div

from config_models import SolverConfig
from diagnostics import check_condition_1, objective
from exceptions import (
    DegenerateDataError,
    DimensionError,
    InputError,
    InstanceSizeError,
    WellPosednessError,
)
from fir_operator import as_system
from nonneg_core import as_nonneg_matrix
from solver import solve

logger = logging.getLogger(__name__)

MAX_ORACLE_LAGS = 3
MAX_ORACLE_EXPERIMENTS = 3
DEFAULT_GRID_DEPTH = 24
DEFAULT_GRID_POINTS = 11
# refinement window: incumbent +/- this many previous grid spacings
REFINE_HALF_WIDTH = 3
RESIDUAL_FLOOR = 1e-12
SLOPE_THRESHOLD = 1e-3
THRESHOLD_GAP_TOLERANCE = 1e-12


class ToyCase(str, Enum):
    INTERIOR = "interior"
    BOUNDARY = "boundary"


class RateRegime(str, Enum):
    EXPONENTIAL = "exponential"
    ONE_OVER_T = "one_over_t"


@dataclass
class ToySolution:
    h_star: np.ndarray
    case: ToyCase
    objective_at_star: float
    unique: bool
    gap: float

    @property
    def on_threshold(self) -> bool:
        return abs(self.gap) <= THRESHOLD_GAP_TOLERANCE


def _toy_data(u0: float, u1: float, y0: float, y1: float) -> Tuple[np.ndarray, np.ndarray]:
    values = (u0, u1, y0, y1)
    if any(not np.isfinite(v) or v < 0 for v in values):
        raise InputError(f"toy data must be finite and nonnegative, got {values}")
    if u0 <= 0:
        raise DegenerateDataError("toy problem needs u0 > 0")
    return np.array([[y0], [y1]], dtype=np.float64), np.array([[u0], [u1]], dtype=np.float64)


def toy_closed_form(u0: float, u1: float, y0: float, y1: float) -> ToySolution:
    """
    Minimizer of I(y||T(h)u) for N = 1, m = 1

    Interior case (y1 u0 >= y0 u1) gives a perfect model; otherwise the
    minimizer sits on the boundary h_1 = 0.

    Raises:
        DegenerateDataError: u0 = 0
    """
    Y, U = _toy_data(u0, u1, y0, y1)
    gap = y1 * u0 - y0 * u1
    if gap >= 0:
        h_star = np.array([y0 / u0, gap / u0**2])
        case = ToyCase.INTERIOR
    else:
        h_star = np.array([(y0 + y1) / (u0 + u1), 0.0])
        case = ToyCase.BOUNDARY
    return ToySolution(
        h_star=h_star,
        case=case,
        objective_at_star=objective(Y, U, h_star),
        unique=bool(y0 * y1 * u0 > 0),
        gap=gap,
    )


def _objective_batch(Y: np.ndarray, lagged: np.ndarray, H: np.ndarray) -> np.ndarray:
    """F for each row of H; +inf where absolute continuity fails"""
    fitted = np.einsum("ck,ikj->cij", H, lagged)
    return np.sum(kl_div(Y[None, :, :], fitted), axis=(1, 2))


def _grid_axes(center: np.ndarray, spacing: float, points: int) -> np.ndarray:
    offsets = (np.arange(points) - points // 2) * spacing
    axes = np.meshgrid(*[c + offsets for c in center], indexing="ij")
    return np.stack([a.reshape(-1) for a in axes], axis=1)


def brute_force_minimize(
    Y,
    U,
    grid_depth: int = DEFAULT_GRID_DEPTH,
    points: int = DEFAULT_GRID_POINTS,
) -> np.ndarray:
    """
    Minimize F by nested grid refinement over the probability simplex

    The minimizer lies on {h : sum_k alpha_{N-k} h_k = S}, parameterized by
    mass weights p (h_k = S p_k / alpha_{N-k}). The first round covers the
    whole simplex; each later round re-centres at the incumbent with a
    window of REFINE_HALF_WIDTH previous spacings. Ties go to the lowest
    lexicographic grid index.

    Raises:
        InstanceSizeError: N > 3 or m > 3
        WellPosednessError: Condition 1 fails
        DegenerateDataError: U_{0.} = 0
    """
    system = as_system(U)
    Y = as_nonneg_matrix(Y, "Y")
    if Y.shape != system.shape:
        raise DimensionError(f"Y has shape {Y.shape} but U has shape {system.shape}")
    if system.N > MAX_ORACLE_LAGS or system.m > MAX_ORACLE_EXPERIMENTS:
        raise InstanceSizeError(
            f"brute force supports N <= {MAX_ORACLE_LAGS} and m <= {MAX_ORACLE_EXPERIMENTS}, "
            f"got N={system.N}, m={system.m}"
        )
    if points < 3 or points % 2 == 0:
        raise InputError("grid points per coordinate must be odd and at least 3")
    condition = check_condition_1(Y, system)
    if not condition.holds:
        raise WellPosednessError("Condition 1 fails", condition.witnesses)
    if system.alpha[0] <= 0:
        raise DegenerateDataError("U_{0.} = 0: h_N does not enter the objective")

    S = float(Y.sum())
    if S == 0:
        return np.zeros(system.N + 1)
    if system.N == 0:
        return np.array([Y[0].sum() / system.U[0].sum()])

    scale = S / np.asarray(system.alpha_reversed)
    lagged = system.lagged_inputs

    # free coordinates p_1..p_N; p_0 = 1 - sum. The first round spans [0, 1].
    spacing = 1.0 / (points - 1)
    center = np.full(system.N, 0.5)
    incumbent: Optional[np.ndarray] = None
    best = np.inf
    for round_index in range(grid_depth):
        free = _grid_axes(center, spacing, points)
        keep = np.all(free >= 0, axis=1) & (free.sum(axis=1) <= 1.0 + 1e-12)
        free = free[keep]
        p = np.column_stack([np.clip(1.0 - free.sum(axis=1), 0.0, None), free])
        values = _objective_batch(Y, lagged, p * scale[None, :])
        winner = int(np.argmin(values))
        if values[winner] <= best:
            best = float(values[winner])
            incumbent = p[winner]
        center = incumbent[1:]
        logger.debug(f"grid round {round_index}: F={best:.15g}, spacing={spacing:.3g}")
        spacing = 2.0 * REFINE_HALF_WIDTH * spacing / (points - 1)

    assert incumbent is not None
    return incumbent * scale


@dataclass
class RateClassification:
    regime: RateRegime
    fitted_rate: float
    residual_trace: List[float]
    case: ToyCase
    gap: float
    predicted_rate: Optional[float] = None
    threshold_limit: Optional[float] = None
    scaled_tail: Optional[float] = None
    fit_window: Tuple[int, int] = (0, 0)
    h_trace: List[List[float]] = field(default_factory=list, repr=False)

    def rate_matches(self, rtol: float = 0.05) -> bool:
        if self.predicted_rate is None:
            return False
        return abs(self.fitted_rate - self.predicted_rate) <= rtol * self.predicted_rate

    def tail_matches(self, rtol: float = 0.02) -> bool:
        if self.threshold_limit is None or self.scaled_tail is None:
            return False
        return abs(self.scaled_tail - self.threshold_limit) <= rtol * self.threshold_limit


def _least_squares(x: np.ndarray, y: np.ndarray) -> Tuple[float, float]:
    """Slope and residual sum of squares of a straight-line fit"""
    design = np.column_stack([np.ones_like(x), x])
    coefficients, _, _, _ = np.linalg.lstsq(design, y, rcond=None)
    misfit = y - design @ coefficients
    return float(coefficients[1]), float(misfit @ misfit)


def rate_experiment(
    u0: float, u1: float, y0: float, y1: float, iters: int = 10_000, init="simplex"
) -> RateClassification:
    """
    Run the solver on a toy instance and classify how h^t approaches h*

    The log residual is fitted against t (geometric decay) and against log t
    (1/t decay) on the last half of the part of the trace above the
    floating-point floor. Residual: h_1^t whenever h*_1 = 0, otherwise the
    sup-norm distance to h*.

    The default start has uniform mass weights, which keeps h^0 away from
    the (1, 1, 1, 2) minimizer that the all-ones start would hit exactly.

    Raises:
        DegenerateDataError: u0 = 0 or y1 = 0
    """
    Y, U = _toy_data(u0, u1, y0, y1)
    if y1 <= 0:
        raise DegenerateDataError("rate experiment needs y1 > 0")
    toy = toy_closed_form(u0, u1, y0, y1)

    config = SolverConfig(
        max_iters=iters,
        init=init,
        tol_kkt=np.finfo(float).tiny,
        tol_objective=np.finfo(float).tiny,
        record_history=True,
    )
    report = solve(Y, U, config)
    trace = np.array(report.history)
    if toy.h_star[1] == 0:
        residuals = trace[:, 1]
    else:
        residuals = np.max(np.abs(trace - toy.h_star[None, :]), axis=1)

    floor = RESIDUAL_FLOOR * max(1.0, float(np.max(toy.h_star)))
    end = 1
    while end < residuals.shape[0] and residuals[end] > floor:
        end += 1
    start = max(1, (1 + end) // 2)
    if end - start < 2:
        raise DegenerateDataError("residual trace reaches the floating-point floor too early")
    t = np.arange(start, end, dtype=np.float64)
    log_residual = np.log(residuals[start:end])

    slope, misfit_exponential = _least_squares(t, log_residual)
    _, misfit_power = _least_squares(np.log(t), log_residual)
    on_threshold = toy.case == ToyCase.INTERIOR and toy.on_threshold
    if abs(slope) < SLOPE_THRESHOLD and misfit_power < misfit_exponential and on_threshold:
        regime = RateRegime.ONE_OVER_T
    else:
        regime = RateRegime.EXPONENTIAL

    predicted = threshold_limit = scaled_tail = None
    if toy.case == ToyCase.BOUNDARY:
        predicted = y1 * (u0 + u1) / ((y0 + y1) * u1)
    elif on_threshold:
        threshold_limit = y1 * (u0 + u1) / u0**2
        last = residuals.shape[0] - 1
        scaled_tail = float(last * residuals[last])
    else:
        predicted = u1 * (y0 + y1) / ((u0 + u1) * y1)

    logger.info(
        f"Rate experiment {(u0, u1, y0, y1)}: {regime.value}, ratio={np.exp(slope):.6g}"
    )
    return RateClassification(
        regime=regime,
        fitted_rate=float(np.exp(slope)),
        residual_trace=residuals.tolist(),
        case=toy.case,
        gap=toy.gap,
        predicted_rate=predicted,
        threshold_limit=threshold_limit,
        scaled_tail=scaled_tail,
        fit_window=(start, end),
        h_trace=trace.tolist(),
    )
