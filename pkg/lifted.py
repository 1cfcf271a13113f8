#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Lifted three-index formulation of the deconvolution problem

Tensors are indexed (i, l, j): time i, lag l, experiment j.
- Y-set: tensors whose (i, j) marginal over l equals the data Y
- W-set: factored tensors W_ilj = h_l U_{i-l,j}

Both partial minimizations have closed forms and satisfy Pythagorean
identities; these serve as per-iteration correctness checks for the solver.
Tensors cost O(N^2 m) memory and are only built in verification paths.
"""

from dataclasses import dataclass, field
from typing import List, Optional, Tuple
import logging

import numpy as np

from exceptions import DegenerateDataError, DimensionError, InfiniteDivergenceError
from fir_operator import ConvolutionSystem, as_system
from nonneg_core import (
    ImpulseResponse,
    absolutely_continuous,
    as_impulse_response,
    as_nonneg_matrix,
    i_divergence,
)

logger = logging.getLogger(__name__)

MEMBERSHIP_TOLERANCE = 1e-12
PYTHAGORAS_TOLERANCE = 1e-10


@dataclass(frozen=True)
class LiftedTensor:
    """Nonnegative (N+1) x (N+1) x m array"""

    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float64)
        if data.ndim != 3 or data.shape[0] != data.shape[1]:
            raise DimensionError(f"lifted tensor must be (N+1, N+1, m), got {data.shape}")
        if np.any(data < 0) or not np.all(np.isfinite(data)):
            raise ValueError("lifted tensor entries must be finite and nonnegative")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def shape(self):
        return self.data.shape

    def marginal(self) -> np.ndarray:
        """(i, j) marginal, summed over the lag index l"""
        return self.data.sum(axis=1)

    def lag_totals(self) -> np.ndarray:
        """Totals per lag l, summed over i and j"""
        return self.data.sum(axis=(0, 2))

    def total(self) -> float:
        return float(self.data.sum())


@dataclass
class MembershipTag:
    in_Y_set: bool
    in_W_set: bool
    recovered_h: Optional[np.ndarray] = None


@dataclass
class IdentityCheck:
    """Both sides of a divergence identity; skipped when a side is infinite"""

    lhs: float
    rhs: float
    residual: Optional[float]
    skipped: bool = False

    def passed(self, rtol: float = PYTHAGORAS_TOLERANCE) -> bool:
        if self.skipped or self.residual is None:
            return True
        return self.residual <= rtol * (1.0 + abs(self.lhs))


def _check_shapes(tensor: LiftedTensor, system: ConvolutionSystem):
    expected = (system.N + 1, system.N + 1, system.m)
    if tensor.shape != expected:
        raise DimensionError(f"tensor has shape {tensor.shape}, expected {expected}")


def lift_from_h(U, h) -> LiftedTensor:
    """W_ilj = h_l U_{i-l,j}; its (i, j) marginal is T(h)U"""
    system = as_system(U)
    h = as_impulse_response(h, system.N + 1)
    return LiftedTensor(system.lagged_inputs * h[None, :, None])


def partial_min_Y(Y, W: LiftedTensor) -> LiftedTensor:
    """
    Minimize I(Y_tensor||W) over the Y-set: Y*_ilj = Y_ij / W_ij * W_ilj

    Raises:
        InfiniteDivergenceError: Y is not absolutely continuous w.r.t. the marginal of W
    """
    Y = as_nonneg_matrix(Y, "Y")
    marginal = W.marginal()
    if marginal.shape != Y.shape:
        raise DimensionError(f"Y has shape {Y.shape}, tensor marginal {marginal.shape}")
    if not absolutely_continuous(Y, marginal):
        raise InfiniteDivergenceError("Y is not absolutely continuous w.r.t. the W marginal")
    scale = np.zeros_like(Y)
    support = marginal > 0
    scale[support] = Y[support] / marginal[support]
    return LiftedTensor(W.data * scale[:, None, :])


def partial_min_W(Y_tensor: LiftedTensor, U) -> Tuple[LiftedTensor, ImpulseResponse]:
    """
    Minimize I(Y_tensor||W) over the W-set: h*_l = Y_{.l.} / alpha_{N-l}

    Raises:
        DegenerateDataError: U_{0.} = 0
    """
    system = as_system(U)
    _check_shapes(Y_tensor, system)
    if system.alpha[0] <= 0:
        raise DegenerateDataError("U_{0.} = 0: the W-set minimization is undefined")
    h_star = Y_tensor.lag_totals() / system.alpha_reversed
    return lift_from_h(system, h_star), h_star


def recover_h(tensor: LiftedTensor, U) -> np.ndarray:
    """Best factor h for a tensor assumed to lie in the W-set"""
    system = as_system(U)
    _check_shapes(tensor, system)
    h = np.zeros(system.N + 1)
    positive = system.alpha_reversed > 0
    h[positive] = tensor.lag_totals()[positive] / system.alpha_reversed[positive]
    return h


def membership(
    tensor: LiftedTensor, Y, U, tolerance: float = MEMBERSHIP_TOLERANCE
) -> MembershipTag:
    """Test the defining constraints of the Y-set and the W-set"""
    system = as_system(U)
    Y = as_nonneg_matrix(Y, "Y")
    _check_shapes(tensor, system)
    marginal_gap = np.max(np.abs(tensor.marginal() - Y))
    in_y = bool(marginal_gap <= tolerance * (1.0 + float(np.max(Y))))
    h = recover_h(tensor, system)
    rebuilt = lift_from_h(system, h).data
    factor_gap = np.max(np.abs(rebuilt - tensor.data))
    in_w = bool(factor_gap <= tolerance * (1.0 + float(np.max(tensor.data))))
    return MembershipTag(in_Y_set=in_y, in_W_set=in_w, recovered_h=h if in_w else None)


def _identity(lhs: float, first: float, second: float) -> IdentityCheck:
    rhs = first + second
    if not (np.isfinite(lhs) and np.isfinite(rhs)):
        logger.debug("Pythagorean check skipped: infinite divergence")
        return IdentityCheck(lhs=lhs, rhs=rhs, residual=None, skipped=True)
    return IdentityCheck(lhs=lhs, rhs=rhs, residual=abs(lhs - rhs))


def pythagoras_Y_check(Y_in_calY: LiftedTensor, W: LiftedTensor) -> IdentityCheck:
    """I(Y||W) = I(Y||Y*(W)) + I(Y*(W)||W) for Y in the Y-set"""
    marginal = Y_in_calY.marginal()
    if not absolutely_continuous(marginal, W.marginal()):
        return IdentityCheck(lhs=float("inf"), rhs=float("inf"), residual=None, skipped=True)
    y_star = partial_min_Y(marginal, W)
    return _identity(
        i_divergence(Y_in_calY.data, W.data),
        i_divergence(Y_in_calY.data, y_star.data),
        i_divergence(y_star.data, W.data),
    )


def pythagoras_W_check(Y_tensor: LiftedTensor, W_in_calW: LiftedTensor, U) -> IdentityCheck:
    """I(Y||W) = I(Y||W*(Y)) + I(W*(Y)||W) for W in the W-set"""
    w_star, _ = partial_min_W(Y_tensor, U)
    return _identity(
        i_divergence(Y_tensor.data, W_in_calW.data),
        i_divergence(Y_tensor.data, w_star.data),
        i_divergence(w_star.data, W_in_calW.data),
    )


@dataclass
class AlternationResult:
    h: np.ndarray
    divergences: List[float]


def alternate(Y, U, h0, iters: int) -> AlternationResult:
    """
    Explicit alternating minimization in the lifted space

    W^t -> Y^t = Y*(W^t) -> W^{t+1} = W*(Y^t), recording I(Y^t||W^t) each round.
    """
    system = as_system(U)
    Y = as_nonneg_matrix(Y, "Y")
    W = lift_from_h(system, h0)
    h = np.array(h0, dtype=np.float64)
    divergences: List[float] = []
    for _ in range(iters):
        y_tensor = partial_min_Y(Y, W)
        divergences.append(i_divergence(y_tensor.data, W.data))
        W, h = partial_min_W(y_tensor, system)
    return AlternationResult(h=h, divergences=divergences)
