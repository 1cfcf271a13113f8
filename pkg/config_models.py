#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Configuration models with Pydantic validation

Provides type-safe configuration management:
- Solver tolerances, initialization and verification switches
- Noise families and input laws for the Monte Carlo experiments
- Oracle grid settings and report options
- Loading, saving and merging JSON configuration files
"""

import json
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union

from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from exceptions import ConfigError


class LoggingConfig(BaseModel):
    """Logging configuration"""

    level: str = Field(default="INFO", pattern="^(DEBUG|INFO|WARNING|ERROR)$")
    file: Optional[str] = Field(default=None, min_length=1)


class SolverConfig(BaseModel):
    """Stopping rules and switches of the multiplicative-update solver"""

    max_iters: int = Field(default=100_000, ge=1)
    tol_objective: float = Field(default=1e-12, gt=0)
    tol_kkt: float = Field(default=1e-8, gt=0)
    stall_patience: int = Field(default=5, ge=1)
    tol_active: Optional[float] = Field(default=None, gt=0)
    init: Union[Literal["ones", "simplex"], List[float]] = Field(default="ones")
    verify_mode: bool = Field(default=False)
    record_history: bool = Field(default=True)

    @field_validator("init")
    @classmethod
    def validate_init(cls, v):
        if isinstance(v, list):
            if not v:
                raise ValueError("explicit initial response cannot be empty")
            if any(x < 0 for x in v):
                raise ValueError("explicit initial response must be nonnegative")
        return v


class OracleConfig(BaseModel):
    """Brute-force grid refinement settings"""

    grid_depth: int = Field(default=24, ge=1, le=200)
    grid_points: int = Field(default=11, ge=3, le=101)
    agreement_tolerance: float = Field(default=1e-4, gt=0)

    @field_validator("grid_points")
    @classmethod
    def validate_grid_points(cls, v):
        if v % 2 == 0:
            raise ValueError("grid_points must be odd so the incumbent stays on the grid")
        return v


class NoiseFamily(str, Enum):
    GAMMA = "gamma_mean_one"
    LOGNORMAL = "lognormal_mean_one"
    TWO_POINT = "two_point_mean_one"
    POINT_MASS = "point_mass"


class NoiseModel(BaseModel):
    """
    Mean-one multiplicative noise

    - gamma_mean_one: shape a, scale 1/a
    - lognormal_mean_one: sigma, with mu = -sigma^2/2
    - two_point_mean_one: values low < 1 < high, probabilities fixed by E[delta] = 1
    - point_mass: delta = 1
    """

    distribution: NoiseFamily = Field(default=NoiseFamily.GAMMA)
    shape: float = Field(default=4.0, gt=0)
    sigma: float = Field(default=0.5, gt=0, le=5)
    low: float = Field(default=0.5, ge=0)
    high: float = Field(default=2.0, gt=0)

    @model_validator(mode="after")
    def validate_two_point(self):
        if self.distribution == NoiseFamily.TWO_POINT and not (self.low < 1.0 < self.high):
            raise ValueError("two-point noise needs low < 1 < high to have mean one")
        return self


class InputLaw(BaseModel):
    """I.i.d. uniform input entries; rows i >= 1 may be zeroed with some probability"""

    low: float = Field(default=0.1, gt=0)
    high: float = Field(default=1.0, gt=0)
    zero_probability: float = Field(default=0.0, ge=0, lt=1)

    @model_validator(mode="after")
    def validate_range(self):
        if self.high <= self.low:
            raise ValueError("input law needs low < high")
        return self


def experiment_solver_config() -> SolverConfig:
    """Defaults for Monte Carlo replicates: looser KKT tolerance, no history"""
    return SolverConfig(tol_kkt=1e-7, max_iters=20_000, record_history=False)


class SimulationConfig(BaseModel):
    """Monte Carlo experiment settings"""

    h_true: List[float] = Field(default=[1.0, 0.5, 0.25], min_length=1)
    noise: NoiseModel = Field(default_factory=NoiseModel)
    input_law: InputLaw = Field(default_factory=InputLaw)
    m_grid: List[int] = Field(default=[16, 64, 256, 1024], min_length=1)
    replicates: int = Field(default=20, ge=1)
    normality_m: int = Field(default=1024, ge=1)
    normality_replicates: int = Field(default=500, ge=2)
    decomposition_samples: int = Field(default=100_000, ge=2)
    h_probe: Optional[List[float]] = None
    seed: int = Field(default=0, ge=0)
    threads: int = Field(default=1, ge=1, le=64)
    solver: SolverConfig = Field(default_factory=experiment_solver_config)

    @field_validator("h_true")
    @classmethod
    def validate_h_true(cls, v):
        if any(x <= 0 for x in v):
            raise ValueError("h_true must be an interior point (all components > 0)")
        return v

    @field_validator("m_grid")
    @classmethod
    def validate_m_grid(cls, v):
        if any(m < 1 for m in v):
            raise ValueError("sample sizes must be positive")
        if any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("m_grid must be strictly increasing")
        return v

    @model_validator(mode="after")
    def validate_probe(self):
        if self.h_probe is not None:
            if len(self.h_probe) != len(self.h_true):
                raise ValueError("h_probe must have the same length as h_true")
            if any(x < 0 for x in self.h_probe):
                raise ValueError("h_probe must be nonnegative")
        return self


class ReportConfig(BaseModel):
    """JSON report options"""

    max_trace_entries: int = Field(default=10_000, ge=2)
    indent: Optional[int] = Field(default=2, ge=0)


class DeconvConfig(BaseModel):
    """Root configuration model"""

    logging: LoggingConfig = Field(default_factory=LoggingConfig)
    solver: SolverConfig = Field(default_factory=SolverConfig)
    oracle: OracleConfig = Field(default_factory=OracleConfig)
    simulation: SimulationConfig = Field(default_factory=SimulationConfig)
    report: ReportConfig = Field(default_factory=ReportConfig)

    @classmethod
    def load_from_file(cls, config_path: str) -> "DeconvConfig":
        """
        Validated configuration from a JSON file; defaults if the file is missing

        Raises:
            ConfigError: the file is not JSON or a value is out of range
        """
        data = _read_json(config_path)
        return cls() if data is None else _validated(data)

    def save_to_file(self, config_path: str) -> bool:
        """Write every setting as JSON; False if the file cannot be written"""
        path = Path(config_path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(json.dumps(self.model_dump(mode="json"), indent=2), encoding="utf-8")
        except OSError:
            return False
        return True

    def merge_with_file(self, config_path: str) -> "DeconvConfig":
        """Overlay the keys present in a JSON file on this configuration"""
        overrides = _read_json(config_path)
        if overrides is None:
            return self
        return _validated(_deep_merge(self.model_dump(mode="json"), overrides))


def _read_json(config_path: str) -> Optional[Dict[str, Any]]:
    path = Path(config_path)
    if not path.exists():
        return None
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read config file {config_path}: {e}")
    if not isinstance(data, dict):
        raise ConfigError(f"config file {config_path} must hold a JSON object")
    return data


def _validated(data: Dict[str, Any]) -> DeconvConfig:
    try:
        return DeconvConfig(**data)
    except ValidationError as e:
        raise ConfigError(f"invalid configuration: {e}")


def _deep_merge(base: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    """Nested dicts merge key by key; any other value replaces the base value"""
    merged = dict(base)
    for key, value in overrides.items():
        if isinstance(merged.get(key), dict) and isinstance(value, dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


class ConfigValidator:
    """Checks used by validate_config.py"""

    @staticmethod
    def validate_config_file(config_path: str) -> Dict[str, Any]:
        """
        Parse a config file and flag settings that are legal but costly

        Returns:
            {"valid": bool, "config": DeconvConfig or None, "errors": [...], "warnings": [...]}
        """
        result: Dict[str, Any] = {
            "valid": False,
            "config": None,
            "errors": [],
            "warnings": [],
        }

        if not Path(config_path).exists():
            result["errors"].append(f"Configuration file not found: {config_path}")
            return result

        try:
            config = DeconvConfig.load_from_file(config_path)
        except ValueError as e:
            result["errors"].append(f"Configuration error: {e}")
            return result

        result["valid"] = True
        result["config"] = config

        if config.solver.max_iters > 1_000_000:
            result["warnings"].append("max_iters > 1e6 may take very long in the 1/t regime")
        if config.solver.verify_mode:
            result["warnings"].append(
                "verify_mode builds O(N^2 m) lifted tensors every iteration"
            )
        if config.simulation.replicates > 2000 or config.simulation.normality_replicates > 2000:
            result["warnings"].append("More than 2000 replicates may take very long")
        if config.oracle.grid_depth > 60:
            result["warnings"].append("grid_depth > 60 refines below double precision")

        return result

    @staticmethod
    def create_sample_config(output_path: str) -> bool:
        """Write a configuration file holding all default values"""
        return DeconvConfig().save_to_file(output_path)
