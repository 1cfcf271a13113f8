#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Causal FIR convolution operator T(h)

(T(h)U)_{ij} = sum_{k=0}^{i} h_k U_{i-k,j}, with U_{ij} := 0 for i < 0.
The operator is the lower-triangular Toeplitz matrix of h acting on the
columns of U. Also provides the exact-model triangular solve for a single
experiment (u_0 on the diagonal).
"""

from dataclasses import dataclass, field
from functools import cached_property
import logging

import numpy as np
from scipy.linalg import solve_triangular, toeplitz

from exceptions import DimensionError, SingularSystemError
from nonneg_core import ImpulseResponse, NonnegMatrix, as_impulse_response, as_nonneg_matrix

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ConvolutionSystem:
    """Inputs U ((N+1) x m) together with the convolution operator they define"""

    U: NonnegMatrix = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "U", as_nonneg_matrix(self.U, "U"))

    @property
    def N(self) -> int:
        """Number of lags (rows - 1)"""
        return self.U.shape[0] - 1

    @property
    def m(self) -> int:
        """Number of experiments"""
        return self.U.shape[1]

    @property
    def shape(self):
        return self.U.shape

    @cached_property
    def alpha(self) -> np.ndarray:
        """alpha_k = sum_{l<=k} U_{l.}"""
        values = np.cumsum(self.U.sum(axis=1))
        values.setflags(write=False)
        return values

    @cached_property
    def alpha_reversed(self) -> np.ndarray:
        """alpha_{N-k} for k = 0..N (the column totals of T(e_k)U)"""
        values = self.alpha[::-1].copy()
        values.setflags(write=False)
        return values

    @cached_property
    def lagged_inputs(self) -> np.ndarray:
        """L[i, k, j] = U_{i-k, j}, zero for k > i"""
        size = self.N + 1
        lagged = np.zeros((size, size, self.m))
        for k in range(size):
            lagged[k:, k, :] = self.U[: size - k, :]
        lagged.setflags(write=False)
        return lagged

    def _response(self, h) -> ImpulseResponse:
        return as_impulse_response(h, self.N + 1)

    def toeplitz(self, h) -> np.ndarray:
        """Explicit lower-triangular Toeplitz matrix T(h)"""
        h = self._response(h)
        return toeplitz(h, np.zeros_like(h))

    def apply(self, h) -> NonnegMatrix:
        """T(h)U; raises DimensionError if len(h) != N+1"""
        h = self._response(h)
        out = np.einsum("k,ikj->ij", h, self.lagged_inputs)
        out.setflags(write=False)
        return out

    def input_matrix(self, column: int = 0) -> np.ndarray:
        """Triangular matrix with u_0 on the diagonal, so that T(h)u = T(u)h"""
        if not 0 <= column < self.m:
            raise DimensionError(f"column {column} out of range for m={self.m}")
        u = self.U[:, column]
        return toeplitz(u, np.zeros_like(u))

    def exact_solve(self, y, column: int = 0) -> np.ndarray:
        """
        Signed solution h of T(h)u = y by forward substitution

        The result may have negative entries; h is a feasible (perfect,
        nonnegative) model iff all entries are >= 0.

        Raises:
            SingularSystemError: u_0 = 0
        """
        y = np.asarray(y, dtype=np.float64).reshape(-1)
        if y.shape[0] != self.N + 1:
            raise DimensionError(f"y has length {y.shape[0]}, expected {self.N + 1}")
        if self.U[0, column] == 0:
            raise SingularSystemError("u_0 = 0: the triangular system is singular")
        return solve_triangular(self.input_matrix(column), y, lower=True)


def as_system(U) -> ConvolutionSystem:
    """Accept either a ConvolutionSystem or a raw input matrix"""
    if isinstance(U, ConvolutionSystem):
        return U
    return ConvolutionSystem(U)


def apply(sys: ConvolutionSystem, h) -> NonnegMatrix:
    return as_system(sys).apply(h)


def exact_solve(sys: ConvolutionSystem, y, column: int = 0) -> np.ndarray:
    return as_system(sys).exact_solve(y, column)


def is_feasible_model(h_signed, tolerance: float = 0.0) -> bool:
    """True iff an exact-solve result is a nonnegative (perfect) model"""
    return bool(np.all(np.asarray(h_signed) >= -tolerance))
