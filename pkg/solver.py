#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Multiplicative-update solver for min_h I(Y||T(h)U) subject to h >= 0

Each step h'_k = h_k G_k(h) with
    G_k(h) = (1 / alpha_{N-k}) sum_j sum_{i>=k} Y_ij U_{i-k,j} / (T(h)U)_ij
is one round of alternating I-divergence minimization in the lifted space,
so the objective never increases and every iterate after the first lies on
the simplex sum_k alpha_{N-k} h_k = sum(Y).

Stopping rules:
- Kuhn-Tucker residual below tol_kkt
- relative objective decrease below tol_objective for stall_patience steps
- max_iters updates
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple
import logging
import time

import numpy as np

from config_models import SolverConfig
from diagnostics import (
    ConditionReport,
    KktResidual,
    back_projection,
    check_conditions,
    gradient,
    kkt_from_gradient,
    kkt_residual,
    matched_pair,
)
from exceptions import (
    DegenerateDataError,
    InitializationError,
    WellPosednessError,
)
from fir_operator import ConvolutionSystem, as_system
from lifted import lift_from_h, partial_min_W, partial_min_Y, pythagoras_W_check, pythagoras_Y_check
from nonneg_core import (
    as_impulse_response,
    i_divergence,
    mass_weights,
)

logger = logging.getLogger(__name__)

MONOTONE_SLACK = 1e-12
SIMPLEX_RTOL = 1e-10
GAIN_RTOL = 1e-10
GAIN_W_ATOL = 1e-12
CROSS_CHECK_RTOL = 1e-12
LYAPUNOV_SLACK = 1e-10
PROGRESS_EVERY = 1000


class Termination(str, Enum):
    KKT_SATISFIED = "kkt_satisfied"
    OBJECTIVE_STALLED = "objective_stalled"
    MAX_ITERS = "max_iters"


@dataclass
class StepGains:
    """Split of one step's objective decrease into its Y-step and W-step parts"""

    gain_y: float
    gain_w: float
    gain_w_simplex: float
    objective_drop: float

    def as_pair(self) -> Tuple[float, float]:
        return self.gain_y, self.gain_w

    def identity_residual(self) -> float:
        return abs(self.objective_drop - (self.gain_y + self.gain_w))

    def identity_holds(self, rtol: float = GAIN_RTOL) -> bool:
        return self.identity_residual() <= rtol * (1.0 + abs(self.objective_drop))

    def simplex_form_holds(self, atol: float = GAIN_W_ATOL) -> bool:
        return abs(self.gain_w - self.gain_w_simplex) <= atol * (1.0 + abs(self.gain_w))


@dataclass
class InvariantSummary:
    """
    Invariants observed along a run

    The lifted-space fields stay None unless the run was in verify mode.
    """

    steps: int = 0
    monotonicity_violations: int = 0
    max_simplex_residual: float = 0.0
    positivity_preserved: bool = True
    max_pythagoras_y: Optional[float] = None
    max_pythagoras_w: Optional[float] = None
    max_gain_residual: Optional[float] = None
    max_gain_w_mismatch: Optional[float] = None
    max_lifted_mismatch: Optional[float] = None
    max_gradient_form_mismatch: Optional[float] = None
    failed_checks: List[str] = field(default_factory=list)

    @property
    def all_passed(self) -> bool:
        return not self.failed_checks

    def _fail(self, name: str):
        if name not in self.failed_checks:
            self.failed_checks.append(name)

    def to_dict(self) -> Dict:
        return {
            "steps": self.steps,
            "monotonicity_violations": self.monotonicity_violations,
            "max_simplex_residual": self.max_simplex_residual,
            "positivity_preserved": self.positivity_preserved,
            "max_pythagoras_y": self.max_pythagoras_y,
            "max_pythagoras_w": self.max_pythagoras_w,
            "max_gain_residual": self.max_gain_residual,
            "max_gain_w_mismatch": self.max_gain_w_mismatch,
            "max_lifted_mismatch": self.max_lifted_mismatch,
            "max_gradient_form_mismatch": self.max_gradient_form_mismatch,
            "all_passed": self.all_passed,
            "failed_checks": list(self.failed_checks),
        }


def _raise_max(current: Optional[float], value: float) -> float:
    return value if current is None else max(current, value)


@dataclass
class SolverReport:
    """Outcome of a solve() run"""

    h_final: np.ndarray
    objective_trace: List[float]
    gain_trace: List[Tuple[float, float]]
    simplex_residuals: List[float]
    kkt_final: KktResidual
    termination: Termination
    iterations_used: int
    total_mass: float
    conditions: ConditionReport
    invariants: InvariantSummary
    dropped_columns: List[int] = field(default_factory=list)
    suboptimal_active_set: List[int] = field(default_factory=list)
    history: Optional[List[np.ndarray]] = None
    wall_time: float = 0.0

    @property
    def objective(self) -> float:
        return self.objective_trace[-1]

    def to_dict(self) -> Dict:
        return {
            "h_final": self.h_final.tolist(),
            "objective": self.objective,
            "objective_trace": list(self.objective_trace),
            "gain_trace": [list(pair) for pair in self.gain_trace],
            "simplex_residuals": list(self.simplex_residuals),
            "kkt": self.kkt_final.to_dict(),
            "termination": self.termination.value,
            "iterations_used": self.iterations_used,
            "total_mass": self.total_mass,
            "conditions": self.conditions.to_dict(),
            "invariants": self.invariants.to_dict(),
            "dropped_columns": list(self.dropped_columns),
            "suboptimal_active_set": list(self.suboptimal_active_set),
            "wall_time": self.wall_time,
        }


def _require_first_row(system: ConvolutionSystem):
    if system.alpha[0] <= 0:
        raise DegenerateDataError("U_{0.} = 0: the update factor for h_N is undefined")


def update_step(Y, U, h) -> np.ndarray:
    """
    One multiplicative update h'_k = h_k G_k(h)

    Raises:
        DomainError: F(h) = +inf
        DegenerateDataError: U_{0.} = 0
    """
    Y, system = matched_pair(Y, U)
    _require_first_row(system)
    h = as_impulse_response(h, system.N + 1)
    return h * back_projection(Y, system, h) / system.alpha_reversed


def gradient_form_step(Y, U, h) -> np.ndarray:
    """The same update written as h_k (1 - grad F(h)_k / alpha_{N-k})"""
    Y, system = matched_pair(Y, U)
    _require_first_row(system)
    h = as_impulse_response(h, system.N + 1)
    return h * (1.0 - gradient(Y, system, h) / system.alpha_reversed)


def step_gain_decomposition(Y, U, h_t, h_t1) -> StepGains:
    """
    gain_y = I(Y^t||Y^{t+1}), gain_w = I(W^{t+1}||W^t) in the lifted space

    gain_w_simplex = S I(p^{t+1}||p^t) is evaluated independently from the
    mass weights p_k = alpha_{N-k} h_k / S. For consecutive iterates
    gain_y + gain_w equals F(h^t) - F(h^{t+1}).
    """
    Y, system = matched_pair(Y, U)
    W_t = lift_from_h(system, h_t)
    W_t1 = lift_from_h(system, h_t1)
    Y_t = partial_min_Y(Y, W_t)
    Y_t1 = partial_min_Y(Y, W_t1)
    S = float(Y.sum())
    gain_w_simplex = S * i_divergence(
        mass_weights(h_t1, system.alpha_reversed, S),
        mass_weights(h_t, system.alpha_reversed, S),
    )
    return StepGains(
        gain_y=i_divergence(Y_t.data, Y_t1.data),
        gain_w=i_divergence(W_t1.data, W_t.data),
        gain_w_simplex=gain_w_simplex,
        objective_drop=i_divergence(Y, system.apply(h_t)) - i_divergence(Y, system.apply(h_t1)),
    )


def simplex_projection_residual(U, h, S: float) -> float:
    """|sum_k h_k alpha_{N-k} - S|"""
    system = as_system(U)
    return abs(float(np.dot(np.asarray(h, dtype=np.float64), system.alpha_reversed)) - S)


def monotone_lyapunov_trace(history, h_ref, U, S: float) -> List[float]:
    """
    I(p^ref||p^t) for each recorded iterate t >= 1

    history[0] is the starting point, which is generally off the simplex and
    is skipped. The weights p = alpha h / S are scale free, so the trace
    equals the one of the problem rescaled to unit output mass.
    """
    system = as_system(U)
    p_ref = mass_weights(h_ref, system.alpha_reversed, S)
    return [
        i_divergence(p_ref, mass_weights(h, system.alpha_reversed, S)) for h in list(history)[1:]
    ]


def lyapunov_trace(report: SolverReport, U) -> List[float]:
    """
    Lyapunov trace of a finished run, using h_final in place of the true limit

    Only meaningful after convergence: h_final approximates h^inf.
    """
    if report.history is None:
        raise ValueError("run was solved without record_history")
    return monotone_lyapunov_trace(report.history, report.h_final, U, report.total_mass)


def is_nonincreasing(values, slack: float) -> bool:
    values = np.asarray(values, dtype=np.float64)
    return bool(np.all(np.diff(values) <= slack)) if values.size > 1 else True


def _initial_point(config: SolverConfig, system: ConvolutionSystem, S: float) -> np.ndarray:
    size = system.N + 1
    if config.init == "ones":
        return np.ones(size)
    if config.init == "simplex":
        # uniform mass weights p_k = 1/(N+1)
        return S / (size * system.alpha_reversed)
    return np.array(as_impulse_response(config.init, size))


def _drop_empty_columns(Y: np.ndarray, U: np.ndarray) -> Tuple[np.ndarray, np.ndarray, List[int]]:
    empty = ~np.any(U > 0, axis=0) & ~np.any(Y > 0, axis=0)
    dropped = [int(j) for j in np.flatnonzero(empty)]
    if dropped:
        logger.debug(f"Dropping empty columns {dropped}")
    return Y[:, ~empty], U[:, ~empty], dropped


def _zero_output_report(
    system: ConvolutionSystem, conditions: ConditionReport, record_history: bool
) -> SolverReport:
    h = np.zeros(system.N + 1)
    kkt = kkt_from_gradient(h, np.array(system.alpha_reversed))
    logger.info("Y is identically zero: h = 0 is the global minimum")
    return SolverReport(
        h_final=h,
        objective_trace=[0.0],
        gain_trace=[],
        simplex_residuals=[],
        kkt_final=kkt,
        termination=Termination.KKT_SATISFIED,
        iterations_used=0,
        total_mass=0.0,
        conditions=conditions,
        invariants=InvariantSummary(),
        history=[h.copy()] if record_history else None,
    )


class _Verifier:
    """Lifted-space checks of one step, run only in verify mode"""

    def __init__(self, Y: np.ndarray, system: ConvolutionSystem, summary: InvariantSummary):
        self.Y = Y
        self.system = system
        self.summary = summary
        self.previous_y_tensor = None

    def check(self, h: np.ndarray, h_new: np.ndarray, grad: np.ndarray) -> Tuple[float, float]:
        summary = self.summary
        system = self.system
        scale = 1.0 + float(np.max(h_new))

        W_t = lift_from_h(system, h)
        Y_t = partial_min_Y(self.Y, W_t)
        _, h_lifted = partial_min_W(Y_t, system)
        lifted_gap = float(np.max(np.abs(h_lifted - h_new)))
        summary.max_lifted_mismatch = _raise_max(summary.max_lifted_mismatch, lifted_gap)
        if lifted_gap > CROSS_CHECK_RTOL * scale:
            summary._fail("lifted_step")

        h_gradient_form = h * (1.0 - grad / system.alpha_reversed)
        form_gap = float(np.max(np.abs(h_gradient_form - h_new)))
        summary.max_gradient_form_mismatch = _raise_max(
            summary.max_gradient_form_mismatch, form_gap
        )
        if form_gap > CROSS_CHECK_RTOL * scale:
            summary._fail("gradient_form")

        # Y-step identity against the previous Y-set tensor, W-step against W^t
        reference = self.previous_y_tensor if self.previous_y_tensor is not None else Y_t
        for name, result in (
            ("pythagoras_y", pythagoras_Y_check(reference, W_t)),
            ("pythagoras_w", pythagoras_W_check(Y_t, W_t, system)),
        ):
            if result.skipped:
                continue
            attr = f"max_{name}"
            setattr(summary, attr, _raise_max(getattr(summary, attr), float(result.residual)))
            if not result.passed():
                summary._fail(name)
        self.previous_y_tensor = Y_t

        gains = step_gain_decomposition(self.Y, system, h, h_new)
        summary.max_gain_residual = _raise_max(
            summary.max_gain_residual,
            gains.identity_residual() / (1.0 + abs(gains.objective_drop)),
        )
        summary.max_gain_w_mismatch = _raise_max(
            summary.max_gain_w_mismatch, abs(gains.gain_w - gains.gain_w_simplex)
        )
        if not gains.identity_holds():
            summary._fail("gain_identity")
        if not gains.simplex_form_holds():
            summary._fail("gain_w_simplex")
        if gains.gain_y < -GAIN_W_ATOL or gains.gain_w < -GAIN_W_ATOL:
            summary._fail("gain_sign")
        return gains.as_pair()


def solve(Y, U, config: Optional[SolverConfig] = None) -> SolverReport:
    """
    Run the multiplicative update until a stopping rule fires

    Args:
        Y: (N+1) x m nonnegative outputs
        U: (N+1) x m nonnegative inputs
        config: stopping rules and switches (defaults if None)

    Returns:
        SolverReport with the final response, traces and invariant summary

    Raises:
        WellPosednessError: Condition 1 fails
        DegenerateDataError: U_{0.} = 0
        InitializationError: F(h^0) = +inf
    """
    config = config or SolverConfig()
    started = time.perf_counter()
    Y, system = matched_pair(Y, U)
    conditions = check_conditions(Y, system)
    if not conditions.well_posed:
        witnesses = conditions.witnesses.get("condition_1", [])
        raise WellPosednessError(
            f"Condition 1 fails: output is positive before any input at {witnesses}",
            witnesses,
        )
    if float(Y.sum()) == 0.0:
        return _zero_output_report(system, conditions, config.record_history)

    Y, U_kept, dropped = _drop_empty_columns(Y, system.U)
    system = ConvolutionSystem(U_kept)
    _require_first_row(system)
    S = float(Y.sum())

    h = _initial_point(config, system, S)
    F = i_divergence(Y, system.apply(h))
    if not np.isfinite(F):
        raise InitializationError("F(h^0) is infinite; choose a positive starting point")
    h0_positive = bool(np.all(h > 0))

    alpha_rev = np.asarray(system.alpha_reversed)
    objective_trace = [F]
    gain_trace: List[Tuple[float, float]] = []
    simplex_residuals: List[float] = []
    history = [h.copy()] if config.record_history else None
    summary = InvariantSummary()
    verifier = _Verifier(Y, system, summary) if config.verify_mode else None
    termination = Termination.MAX_ITERS
    kkt: Optional[KktResidual] = None
    stalled = 0
    iterations = 0

    logger.info(
        f"Solving N={system.N}, m={system.m}, S={S:.6g}, F(h0)={F:.6g}, init={config.init!r}"
    )

    while True:
        back = back_projection(Y, system, h)
        grad = alpha_rev - back
        kkt = kkt_from_gradient(h, grad, config.tol_active)
        if kkt.satisfied(config.tol_kkt):
            termination = Termination.KKT_SATISFIED
            break
        if iterations >= config.max_iters:
            break

        G = back / alpha_rev
        h_new = h * G
        F_new = i_divergence(Y, system.apply(h_new))

        if verifier is not None:
            gain_trace.append(verifier.check(h, h_new, grad))

        if F_new > F + MONOTONE_SLACK:
            summary.monotonicity_violations += 1
            summary._fail("monotonicity")
        residual = simplex_projection_residual(system, h_new, S)
        simplex_residuals.append(residual)
        summary.max_simplex_residual = max(summary.max_simplex_residual, residual / S)
        if residual > SIMPLEX_RTOL * S:
            summary._fail("simplex")
        # a vanishing factor, not an underflowed iterate, breaks positivity
        if h0_positive and np.any((h > 0) & (G <= 0)):
            summary.positivity_preserved = False
            if conditions.strictly_convex:
                summary._fail("positivity")

        decrease = F - F_new
        stalled = stalled + 1 if decrease <= config.tol_objective * max(abs(F), 1e-300) else 0

        h, F = h_new, F_new
        iterations += 1
        summary.steps = iterations
        objective_trace.append(F)
        if history is not None:
            history.append(h.copy())
        if iterations % PROGRESS_EVERY == 0:
            logger.debug(f"iteration {iterations}: F={F:.12g}, kkt={kkt.max_violation:.3g}")

        if stalled >= config.stall_patience:
            termination = Termination.OBJECTIVE_STALLED
            kkt = kkt_residual(Y, system, h, config.tol_active)
            break

    assert kkt is not None
    suboptimal = [
        int(k) for k in np.flatnonzero((h == 0) & (kkt.gradient < -config.tol_kkt))
    ]
    if suboptimal:
        logger.warning(
            f"Coordinates {suboptimal} are pinned at zero with negative gradient: "
            "the active set may be suboptimal"
        )
    if not summary.all_passed:
        logger.warning(f"Invariant checks failed: {summary.failed_checks}")

    report = SolverReport(
        h_final=h,
        objective_trace=objective_trace,
        gain_trace=gain_trace,
        simplex_residuals=simplex_residuals,
        kkt_final=kkt,
        termination=termination,
        iterations_used=iterations,
        total_mass=S,
        conditions=conditions,
        invariants=summary,
        dropped_columns=dropped,
        suboptimal_active_set=suboptimal,
        history=history,
        wall_time=time.perf_counter() - started,
    )
    logger.info(
        f"Finished after {iterations} iterations ({termination.value}), "
        f"F={F:.12g}, kkt={kkt.max_violation:.3g}"
    )
    return report
