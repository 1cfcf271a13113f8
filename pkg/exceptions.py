#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Error hierarchy for nonnegative FIR deconvolution

Two families, mapped to CLI exit codes:
- InputError (exit 1): malformed files, bad shapes, invalid configuration
- PreconditionError (exit 2): data that violates a mathematical precondition

Every class derives from ValueError so generic callers keep working.
"""

from typing import List, Optional, Sequence, Tuple


class DeconvolutionError(ValueError):
    """Base class for all errors raised by this package"""

    exit_code = 1


class InputError(DeconvolutionError):
    """Input could not be parsed or has the wrong shape"""

    exit_code = 1


class DimensionError(InputError):
    """Array shapes or vector lengths do not match"""


class MatrixFileError(InputError):
    """A CSV matrix file is ragged or holds a non-numeric / negative value"""

    def __init__(
        self, message: str, row: Optional[int] = None, column: Optional[int] = None
    ):
        location = ""
        if row is not None:
            location = f" (row {row}" + (f", column {column})" if column is not None else ")")
        super().__init__(message + location)
        self.row = row
        self.column = column


class ConfigError(InputError):
    """Configuration values are invalid"""


class PreconditionError(DeconvolutionError):
    """Data is well-formed but violates a mathematical precondition"""

    exit_code = 2


class DegenerateDataError(PreconditionError):
    """Data is degenerate (e.g. Y identically zero, or U_{0.} = 0)"""


class DomainError(PreconditionError):
    """Point lies outside the effective domain, F(h) = +inf"""


class InfiniteDivergenceError(DomainError):
    """Absolute continuity fails in a lifted partial minimization"""


class SingularSystemError(PreconditionError):
    """Triangular system has a zero diagonal (u_0 = 0)"""


class WellPosednessError(PreconditionError):
    """Condition 1 fails: some output is positive before any input"""

    def __init__(self, message: str, witnesses: Sequence[Tuple[int, Optional[int]]] = ()):
        super().__init__(message)
        self.witnesses: List[Tuple[int, Optional[int]]] = list(witnesses)


class InitializationError(PreconditionError):
    """Starting point has infinite objective"""


class InstanceSizeError(PreconditionError):
    """Instance is too large (or has the wrong shape) for an oracle"""
