#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Matrix files and JSON run reports

- CSV matrices: row i = time index i, column j = experiment j, optional
  single header row, decimal point only
- SHA-256 digests of input files
- Versioned run reports (schema_version "1") and their re-validation
"""

import csv
import hashlib
import json
import re
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

import numpy as np
from pydantic import BaseModel, Field, ValidationError

from diagnostics import kkt_residual
from exceptions import InputError, MatrixFileError

SCHEMA_VERSION = "1"
SCHEMA_FILE = Path(__file__).parent / "report_schema.json"

# plain decimals with optional exponent; no signs other than '+', no separators
_DECIMAL = re.compile(r"^\+?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$")
_NEGATIVE = re.compile(r"^-(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$")


def _parse_cell(text: str, line: int, column: int) -> float:
    cell = text.strip()
    if _DECIMAL.match(cell):
        return float(cell)
    if _NEGATIVE.match(cell) and float(cell) != 0.0:
        raise MatrixFileError(f"negative value {cell!r}", line, column)
    if _NEGATIVE.match(cell):
        return 0.0
    raise MatrixFileError(f"not a nonnegative decimal: {cell!r}", line, column)


def _looks_numeric(cell: str) -> bool:
    """Anything float() accepts, nan and inf included"""
    if _DECIMAL.match(cell) or _NEGATIVE.match(cell):
        return True
    try:
        float(cell)
    except ValueError:
        return False
    return True


def _is_header(row: List[str]) -> bool:
    """A header row has no number-like cell; mixed rows are data and fail to parse"""
    cells = [cell.strip() for cell in row if cell.strip()]
    return bool(cells) and not any(_looks_numeric(cell) for cell in cells)


def parse_matrix(text: str, name: str = "matrix") -> np.ndarray:
    """
    Parse CSV text into an (N+1) x m nonnegative matrix

    Locations in errors are 1-based file line and column numbers.

    Raises:
        MatrixFileError: empty, ragged, non-numeric or negative content
    """
    rows = [
        (line, row)
        for line, row in enumerate(csv.reader(text.splitlines()), start=1)
        if any(cell.strip() for cell in row)
    ]
    if rows and _is_header(rows[0][1]):
        rows = rows[1:]
    if not rows:
        raise MatrixFileError(f"{name} has no data rows")

    width = len(rows[0][1])
    values = []
    for line, row in rows:
        if len(row) != width:
            raise MatrixFileError(
                f"{name} is ragged: expected {width} columns, found {len(row)}", line
            )
        values.append([_parse_cell(cell, line, column) for column, cell in enumerate(row, start=1)])
    return np.array(values, dtype=np.float64)


def read_matrix(path: str, name: Optional[str] = None) -> np.ndarray:
    """Read a CSV matrix file; I/O failures become MatrixFileError"""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        raise MatrixFileError(f"cannot read {path}: {e}")
    return parse_matrix(text, name or str(path))


def write_matrix(path: str, matrix) -> None:
    array = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        for row in array:
            writer.writerow([repr(float(v)) for v in row])


def file_digest(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def downsample_trace(values, max_entries: int) -> Dict[str, Any]:
    """Evenly spaced subsample that always keeps the first and last entries"""
    values = list(values)
    length = len(values)
    if length <= max_entries:
        indices = list(range(length))
    else:
        indices = sorted(
            set(int(i) for i in np.round(np.linspace(0, length - 1, max_entries)))
        )
    return {
        "length": length,
        "downsampled": length > max_entries,
        "indices": indices,
        "values": [values[i] for i in indices],
    }


def to_jsonable(value: Any) -> Any:
    """numpy types to builtins, non-finite floats to None"""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        return float(value) if np.isfinite(value) else None
    return value


class InputDigest(BaseModel):
    path: str
    sha256: str
    shape: List[int]


class RunReport(BaseModel):
    """Versioned JSON document written by every command"""

    schema_version: Literal["1"] = SCHEMA_VERSION
    command: str = Field(..., pattern="^(check|estimate|oracle|simulate)$")
    inputs: Dict[str, InputDigest] = Field(default_factory=dict)
    config: Dict[str, Any] = Field(default_factory=dict)
    result: Dict[str, Any] = Field(default_factory=dict)
    wall_time: float = Field(default=0.0, ge=0)


def describe_input(path: str, matrix: np.ndarray) -> InputDigest:
    return InputDigest(path=str(path), sha256=file_digest(path), shape=list(matrix.shape))


def build_run_report(
    command: str,
    result: Dict[str, Any],
    inputs: Optional[Dict[str, InputDigest]] = None,
    config: Optional[Dict[str, Any]] = None,
    wall_time: float = 0.0,
) -> RunReport:
    return RunReport(
        command=command,
        inputs=inputs or {},
        config=to_jsonable(config or {}),
        result=to_jsonable(result),
        wall_time=wall_time,
    )


def dump_report(report: RunReport, indent: Optional[int] = 2) -> str:
    return json.dumps(report.model_dump(mode="json"), indent=indent, allow_nan=False)


class RevalidationResult(BaseModel):
    ok: bool
    messages: List[str] = Field(default_factory=list)
    stored_violation: Optional[float] = None
    recomputed_violation: Optional[float] = None


def load_report(text: str) -> RunReport:
    try:
        return RunReport.model_validate_json(text)
    except ValidationError as e:
        raise InputError(f"not a valid run report: {e}")


def revalidate_report(text: str, Y, U, rtol: float = 1e-9) -> RevalidationResult:
    """
    Re-parse an estimate report and recompute the KKT residual of its h_final

    The stored and recomputed max_violation must agree to rtol (relative,
    with an absolute floor of rtol).
    """
    report = load_report(text)
    messages: List[str] = []
    if report.command != "estimate":
        return RevalidationResult(ok=False, messages=[f"not an estimate report: {report.command}"])
    result = report.result
    try:
        h_final = np.array(result["h_final"], dtype=np.float64)
        stored = float(result["kkt"]["max_violation"])
        tol_active = result["kkt"].get("tol_active")
    except (KeyError, TypeError, ValueError) as e:
        return RevalidationResult(ok=False, messages=[f"report is missing fields: {e}"])

    recomputed = kkt_residual(Y, U, h_final, tol_active).max_violation
    if abs(recomputed - stored) > rtol * max(1.0, abs(stored)):
        messages.append(f"KKT residual mismatch: stored {stored!r}, recomputed {recomputed!r}")
    return RevalidationResult(
        ok=not messages,
        messages=messages,
        stored_violation=stored,
        recomputed_violation=recomputed,
    )
