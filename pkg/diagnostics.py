#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Data conditions and optimality diagnostics for F(h) = I(Y||T(h)U)

- Condition 1 (well-posedness) and Condition 2 (strict convexity) checks
- Objective, gradient and Hessian of F
- Kuhn-Tucker residuals for the constraint h >= 0
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.linalg import eigvalsh

from exceptions import DimensionError, DomainError
from fir_operator import ConvolutionSystem, as_system
from nonneg_core import absolutely_continuous, as_impulse_response, as_nonneg_matrix, i_divergence

Witness = Tuple[int, Optional[int]]


@dataclass
class ConditionCheck:
    """Outcome of a single data condition; witnesses are (i, j) with j 1-based"""

    name: str
    holds: bool
    witnesses: List[Witness] = field(default_factory=list)


@dataclass
class ConditionReport:
    """Both data conditions; strictly_convex is never reported without well_posed"""

    well_posed: bool
    strictly_convex: bool
    witnesses: Dict[str, List[Witness]] = field(default_factory=dict)

    def to_dict(self) -> Dict:
        return {
            "well_posed": self.well_posed,
            "strictly_convex": self.strictly_convex,
            "witnesses": {
                name: [[i, j] for i, j in pairs] for name, pairs in self.witnesses.items()
            },
        }


@dataclass
class KktResidual:
    """Kuhn-Tucker residual of h for min F(h) s.t. h >= 0"""

    gradient: np.ndarray
    max_violation: float
    active_set: List[int]
    violations: np.ndarray
    tol_active: float

    def satisfied(self, tolerance: float) -> bool:
        return self.max_violation <= tolerance

    def to_dict(self) -> Dict:
        return {
            "gradient": self.gradient.tolist(),
            "max_violation": self.max_violation,
            "active_set": list(self.active_set),
            "tol_active": self.tol_active,
        }


def matched_pair(Y, U) -> Tuple[np.ndarray, ConvolutionSystem]:
    """Validated Y with the convolution system of U; shapes must agree"""
    system = as_system(U)
    Y = as_nonneg_matrix(Y, "Y")
    if Y.shape != system.shape:
        raise DimensionError(f"Y has shape {Y.shape} but U has shape {system.shape}")
    return Y, system


def check_condition_1(Y, U) -> ConditionCheck:
    """For every Y_ij > 0 some l <= i has U_lj > 0"""
    Y, system = matched_pair(Y, U)
    input_seen = np.cumsum(system.U > 0, axis=0) > 0
    bad = np.argwhere((Y > 0) & ~input_seen)
    witnesses = [(int(i), int(j) + 1) for i, j in bad]
    return ConditionCheck("condition_1", not witnesses, witnesses)


def check_condition_2(Y, U) -> ConditionCheck:
    """For every row i some j has Y_ij > 0 and U_0j > 0"""
    Y, system = matched_pair(Y, U)
    covered = np.any((Y > 0) & (system.U[0, :] > 0)[None, :], axis=1)
    witnesses: List[Witness] = [(int(i), None) for i in np.flatnonzero(~covered)]
    return ConditionCheck("condition_2", not witnesses, witnesses)


def check_conditions(Y, U) -> ConditionReport:
    first = check_condition_1(Y, U)
    second = check_condition_2(Y, U)
    witnesses = {c.name: c.witnesses for c in (first, second) if not c.holds}
    return ConditionReport(
        well_posed=first.holds,
        strictly_convex=first.holds and second.holds,
        witnesses=witnesses,
    )


def objective(Y, U, h) -> float:
    """F(h) = I(Y||T(h)U), possibly +inf"""
    Y, system = matched_pair(Y, U)
    return i_divergence(Y, system.apply(h))


def _ratio(Y: np.ndarray, fitted: np.ndarray, power: int = 1) -> np.ndarray:
    if not absolutely_continuous(Y, fitted):
        raise DomainError("F(h) is infinite: Y is not absolutely continuous w.r.t. T(h)U")
    out = np.zeros_like(Y)
    support = Y > 0
    out[support] = Y[support] / fitted[support] ** power
    return out


def back_projection(Y: np.ndarray, system: ConvolutionSystem, h) -> np.ndarray:
    """
    sum_j sum_{i>=k} Y_ij U_{i-k,j} / (T(h)U)_ij for each k

    Y must already match the system; see matched_pair.

    Raises:
        DomainError: F(h) = +inf
    """
    ratio = _ratio(Y, system.apply(h))
    return np.einsum("ij,ikj->k", ratio, system.lagged_inputs)


def gradient(Y, U, h) -> np.ndarray:
    """
    grad F(h)_k = -sum_j sum_{i>=k} Y_ij U_{i-k,j} / (T(h)U)_ij + alpha_{N-k}

    Raises:
        DomainError: F(h) = +inf
    """
    Y, system = matched_pair(Y, U)
    h = as_impulse_response(h, system.N + 1)
    return system.alpha_reversed - back_projection(Y, system, h)


def hessian(Y, U, h) -> np.ndarray:
    """H_kl = sum_ij Y_ij / (T(h)U)_ij^2 U_{i-k,j} U_{i-l,j}"""
    Y, system = matched_pair(Y, U)
    h = as_impulse_response(h, system.N + 1)
    weight = _ratio(Y, system.apply(h), power=2)
    L = system.lagged_inputs
    return np.einsum("ij,ikj,ilj->kl", weight, L, L)


def default_tol_active(h) -> float:
    scale = float(np.max(h)) if np.size(h) and np.max(h) > 0 else 1.0
    return 1e-12 * scale


def kkt_from_gradient(h, grad, tol_active: Optional[float] = None) -> KktResidual:
    """Classify coordinates and measure the KKT violation for a known gradient"""
    h = np.asarray(h, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64)
    if tol_active is None:
        tol_active = default_tol_active(h)
    active = h <= tol_active
    violations = np.where(active, np.maximum(0.0, -grad), np.abs(grad))
    return KktResidual(
        gradient=grad,
        max_violation=float(violations.max()) if violations.size else 0.0,
        active_set=[int(k) for k in np.flatnonzero(active)],
        violations=violations,
        tol_active=float(tol_active),
    )


def kkt_residual(Y, U, h, tol_active: Optional[float] = None) -> KktResidual:
    """
    Kuhn-Tucker residual: |grad_k| on free coordinates, max(0, -grad_k) on
    active ones (h_k <= tol_active). By convexity a small residual certifies
    approximate optimality.
    """
    return kkt_from_gradient(h, gradient(Y, U, h), tol_active)


def smallest_hessian_eigenvalue(Y, U, h) -> float:
    return float(eigvalsh(hessian(Y, U, h))[0])
