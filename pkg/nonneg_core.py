#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Nonnegative arrays and the I-divergence

Provides the building blocks every other module relies on:
- Validation of nonnegative matrices (NonnegMatrix) and impulse responses
- Csiszar's I-divergence with the 0/0 = 0 and 0 log 0 = 0 conventions
- Absolute continuity test (finiteness of the divergence)
- Scale normalization of a problem to total output mass one
- Simplex weights p_k = alpha_{N-k} h_k / S of an impulse response

Arrays are returned read-only; values are immutable after construction.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np
import numpy.typing as npt
from scipy.special import kl_div

from exceptions import DegenerateDataError, DimensionError, DomainError, InputError

# (N+1) x m nonnegative float array: rows are time indices, columns experiments
NonnegMatrix = npt.NDArray[np.float64]
# length N+1 nonnegative float vector
ImpulseResponse = npt.NDArray[np.float64]

SIMPLEX_TOLERANCE = 1e-10


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


def as_nonneg_matrix(data, name: str = "matrix") -> NonnegMatrix:
    """
    Validate and copy data into a read-only nonnegative float matrix

    A one-dimensional input is taken as a single column.

    Raises:
        DimensionError: empty input or more than two dimensions
        InputError: negative or non-finite entries
    """
    array = np.array(data, dtype=np.float64)
    if array.ndim == 1:
        array = array.reshape(-1, 1)
    if array.ndim != 2:
        raise DimensionError(f"{name} must be two-dimensional, got shape {array.shape}")
    if array.shape[0] < 1 or array.shape[1] < 1:
        raise DimensionError(f"{name} must have at least one row and column")
    if not np.all(np.isfinite(array)):
        raise InputError(f"{name} contains non-finite values")
    if np.any(array < 0):
        raise InputError(f"{name} contains negative values")
    return _frozen(array)


def as_impulse_response(h, length: int = -1) -> ImpulseResponse:
    """Validate a nonnegative impulse response, optionally of a given length"""
    vector = np.array(h, dtype=np.float64).reshape(-1)
    if length >= 0 and vector.shape[0] != length:
        raise DimensionError(
            f"impulse response has length {vector.shape[0]}, expected {length}"
        )
    if not np.all(np.isfinite(vector)):
        raise InputError("impulse response contains non-finite values")
    if np.any(vector < 0):
        raise InputError("impulse response must be nonnegative")
    return _frozen(vector)


def _same_shape(M, N) -> Tuple[np.ndarray, np.ndarray]:
    left = np.asarray(M, dtype=np.float64)
    right = np.asarray(N, dtype=np.float64)
    if left.shape != right.shape:
        raise DimensionError(f"shape mismatch: {left.shape} vs {right.shape}")
    return left, right


def absolutely_continuous(M, N) -> bool:
    """True iff M_ij = 0 wherever N_ij = 0 (exact zeros, no epsilon)"""
    left, right = _same_shape(M, N)
    return not bool(np.any((right == 0) & (left != 0)))


def i_divergence(M, N) -> float:
    """
    I-divergence sum(M log(M/N) - M + N), or +inf without absolute continuity

    Works for arrays of any (equal) shape: matrices, lifted tensors, vectors.
    """
    left, right = _same_shape(M, N)
    if not absolutely_continuous(left, right):
        return float("inf")
    # kl_div(0, n) = n and kl_div(0, 0) = 0 give the 0 log 0 conventions
    return float(np.sum(kl_div(left, right)))


def rescale_problem(Y, U) -> Tuple[NonnegMatrix, NonnegMatrix, float]:
    """
    Normalize a problem to total output mass one

    Returns (Y/S, U/S, S) with S = sum(Y); I(Y||T(h)U) = S * I(Y/S||T(h)U/S).

    Raises:
        DegenerateDataError: Y is identically zero
    """
    Y = as_nonneg_matrix(Y, "Y")
    U = as_nonneg_matrix(U, "U")
    if Y.shape != U.shape:
        raise DimensionError(f"Y has shape {Y.shape} but U has shape {U.shape}")
    S = float(Y.sum())
    if S <= 0:
        raise DegenerateDataError("Y is identically zero, cannot rescale")
    return _frozen(Y / S), _frozen(U / S), S


def mass_weights(h, alpha_reversed, S: float) -> np.ndarray:
    """Raw weights alpha_{N-k} h_k / S, without any simplex check"""
    return np.asarray(alpha_reversed, dtype=np.float64) * np.asarray(h, dtype=np.float64) / S


@dataclass(frozen=True)
class SimplexWeights:
    """Probability vector p_k = alpha_{N-k} h_k / S attached to an iterate on the simplex"""

    p: np.ndarray
    S: float

    @classmethod
    def from_response(
        cls, h, alpha_reversed, S: float, tolerance: float = SIMPLEX_TOLERANCE
    ) -> "SimplexWeights":
        if S <= 0:
            raise DegenerateDataError("total output mass S must be positive")
        p = mass_weights(h, alpha_reversed, S)
        if np.any(p < 0):
            raise ValueError("simplex weights must be nonnegative")
        total = float(p.sum())
        if abs(total - 1.0) > tolerance:
            raise DomainError(f"response is off the simplex: weights sum to {total!r}")
        return cls(p=_frozen(p), S=float(S))
