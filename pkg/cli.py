#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Command-line front end for nonnegative FIR deconvolution

Usage:
    python cli.py check U.csv Y.csv
    python cli.py estimate U.csv Y.csv [--verify] [--init simplex] [--out report.json]
    python cli.py oracle U.csv Y.csv [--depth 24]
    python cli.py simulate [--noise gamma] [--m-grid 16,64,256,1024] [--seed 42]

JSON reports go to standard output, logs to standard error.
Exit status: 0 success, 1 input or configuration error, 2 precondition failure.
"""

import argparse
import logging
import sys
import time
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
from pydantic import ValidationError

from config_models import DeconvConfig, LoggingConfig, SimulationConfig, SolverConfig
from diagnostics import check_conditions, objective
from exceptions import ConfigError, DeconvolutionError, DimensionError
from matrix_io import (
    InputDigest,
    build_run_report,
    describe_input,
    downsample_trace,
    dump_report,
    read_matrix,
)
from reference_oracles import brute_force_minimize
from replicate_strategies import strategy_for_threads
from solver import lyapunov_trace, solve
from stats_harness import (
    consistency_experiment,
    limit_criterion_decomposition_check,
    normality_experiment,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_PRECONDITION = 2

NOISE_ALIASES = {
    "gamma": "gamma_mean_one",
    "lognormal": "lognormal_mean_one",
    "two-point": "two_point_mean_one",
    "point-mass": "point_mass",
}


class ArgumentParser(argparse.ArgumentParser):
    """argparse with usage errors mapped to the input-error exit status"""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def setup_logging(config: LoggingConfig, level: Optional[str] = None):
    """Log to stderr, and to a file when one is configured"""
    handlers: List[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if config.file:
        Path(config.file).parent.mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(config.file))
    logging.basicConfig(
        level=getattr(logging, (level or config.level).upper()),
        format="%(asctime)s - %(levelname)s - %(message)s",
        handlers=handlers,
        force=True,
    )


def _float_list(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _int_list(text: str) -> List[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _noise_name(text: str) -> str:
    return NOISE_ALIASES.get(text, text)


def build_parser() -> argparse.ArgumentParser:
    parser = ArgumentParser(description="Nonnegative FIR deconvolution by I-divergence minimization")
    parser.add_argument("--config", default="config.json", help="Configuration file (JSON)")
    parser.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    parser.add_argument("--threads", type=int, help="Worker threads for Monte Carlo replicates")
    commands = parser.add_subparsers(dest="command", required=True)

    check = commands.add_parser("check", help="Check well-posedness and strict convexity")
    check.add_argument("u_path", help="Input matrix U (CSV)")
    check.add_argument("y_path", help="Output matrix Y (CSV)")

    estimate = commands.add_parser("estimate", help="Estimate the impulse response")
    estimate.add_argument("u_path")
    estimate.add_argument("y_path")
    estimate.add_argument("--max-iters", type=int)
    estimate.add_argument("--tol-kkt", type=float)
    estimate.add_argument("--tol-objective", type=float)
    estimate.add_argument("--init", help="ones, simplex or file:PATH")
    estimate.add_argument("--verify", action="store_true", help="Check lifted-space identities")
    estimate.add_argument("--history", action="store_true", help="Include iterates in the report")
    estimate.add_argument("--seed", type=int, help="Reserved; estimation is deterministic")
    estimate.add_argument("--out", help="Also write the report to this file")

    oracle = commands.add_parser("oracle", help="Compare the solver with brute-force search")
    oracle.add_argument("u_path")
    oracle.add_argument("y_path")
    oracle.add_argument("--depth", type=int, help="Grid refinement rounds")
    oracle.add_argument("--points", type=int, help="Grid points per coordinate (odd)")

    simulate = commands.add_parser("simulate", help="Monte Carlo consistency experiments")
    simulate.add_argument("--h-true", type=_float_list, help="e.g. 1,0.5,0.25")
    simulate.add_argument("--noise", type=_noise_name, help="gamma, lognormal, two-point, point-mass")
    simulate.add_argument("--noise-shape", type=float, help="Gamma shape a")
    simulate.add_argument("--noise-sigma", type=float, help="Lognormal sigma")
    simulate.add_argument("--m-grid", type=_int_list, help="e.g. 16,64,256,1024")
    simulate.add_argument("--replicates", type=int)
    simulate.add_argument("--seed", type=int)
    simulate.add_argument(
        "--mode",
        choices=["consistency", "normality", "decomposition", "all"],
        default="consistency",
    )
    simulate.add_argument("--normality-m", type=int)
    simulate.add_argument("--normality-replicates", type=int)
    simulate.add_argument("--mc-samples", type=int, help="Samples for the decomposition check")
    simulate.add_argument("--h-probe", type=_float_list)
    simulate.add_argument("--out")
    return parser


def _load_config(path: str) -> DeconvConfig:
    try:
        return DeconvConfig.load_from_file(path)
    except ValueError as e:
        raise ConfigError(str(e))


def _overridden(model, **overrides):
    """Re-validate a config model with the non-None overrides applied"""
    values = model.model_dump()
    values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return type(model)(**values)
    except ValidationError as e:
        raise ConfigError(f"invalid option: {e}")


def _read_pair(args) -> Dict[str, Any]:
    U = read_matrix(args.u_path, "U")
    Y = read_matrix(args.y_path, "Y")
    if U.shape != Y.shape:
        raise DimensionError(f"U has shape {U.shape} but Y has shape {Y.shape}")
    inputs: Dict[str, InputDigest] = {
        "u": describe_input(args.u_path, U),
        "y": describe_input(args.y_path, Y),
    }
    return {"U": U, "Y": Y, "inputs": inputs}


def _emit(report, config: DeconvConfig, out: Optional[str] = None):
    text = dump_report(report, config.report.indent)
    print(text)
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")


def cmd_check(args, config: DeconvConfig) -> int:
    started = time.perf_counter()
    data = _read_pair(args)
    conditions = check_conditions(data["Y"], data["U"])
    report = build_run_report(
        "check",
        conditions.to_dict(),
        inputs=data["inputs"],
        wall_time=time.perf_counter() - started,
    )
    _emit(report, config)
    if not conditions.well_posed:
        logger.error(f"Condition 1 fails at {conditions.witnesses.get('condition_1')}")
        return EXIT_PRECONDITION
    return EXIT_OK


def _solver_config(args, config: DeconvConfig) -> SolverConfig:
    init: Any = None
    if args.init:
        if args.init.startswith("file:"):
            init = read_matrix(args.init[len("file:") :], "initial response").reshape(-1).tolist()
        elif args.init in ("ones", "simplex"):
            init = args.init
        else:
            raise ConfigError(f"--init must be ones, simplex or file:PATH, got {args.init!r}")
    return _overridden(
        config.solver,
        max_iters=args.max_iters,
        tol_kkt=args.tol_kkt,
        tol_objective=args.tol_objective,
        init=init,
        verify_mode=True if args.verify else None,
    )


def cmd_estimate(args, config: DeconvConfig) -> int:
    started = time.perf_counter()
    data = _read_pair(args)
    solver_config = _solver_config(args, config)
    report = solve(data["Y"], data["U"], solver_config)
    limit = config.report.max_trace_entries

    result = report.to_dict()
    result["objective_trace"] = downsample_trace(report.objective_trace, limit)
    result["gain_trace"] = downsample_trace(report.gain_trace, limit)
    result["simplex_residuals"] = downsample_trace(report.simplex_residuals, limit)
    if report.history is not None and report.total_mass > 0:
        result["lyapunov_trace"] = {
            "reference": "h_final (approximates the limit; valid only after convergence)",
            **downsample_trace(lyapunov_trace(report, data["U"]), limit),
        }
        if args.history:
            result["history"] = downsample_trace([h.tolist() for h in report.history], limit)

    run_report = build_run_report(
        "estimate",
        result,
        inputs=data["inputs"],
        config={"solver": solver_config.model_dump(mode="json"), "seed": args.seed},
        wall_time=time.perf_counter() - started,
    )
    _emit(run_report, config, args.out)
    return EXIT_OK


def cmd_oracle(args, config: DeconvConfig) -> int:
    started = time.perf_counter()
    data = _read_pair(args)
    oracle_config = _overridden(config.oracle, grid_depth=args.depth, grid_points=args.points)
    Y, U = data["Y"], data["U"]

    h_grid = brute_force_minimize(Y, U, oracle_config.grid_depth, oracle_config.grid_points)
    solver_config = _overridden(config.solver, record_history=False)
    report = solve(Y, U, solver_config)

    F_grid = objective(Y, U, h_grid)
    F_solver = report.objective
    h_gap = float(np.max(np.abs(report.h_final - h_grid)))
    objective_gap = F_solver - F_grid
    agree = h_gap <= oracle_config.agreement_tolerance or abs(objective_gap) <= 1e-8
    if not agree:
        logger.warning(f"Solver and brute force disagree: h gap {h_gap:.3g}")

    result = {
        "brute_force": {"h": h_grid, "objective": F_grid},
        "solver": {
            "h": report.h_final,
            "objective": F_solver,
            "termination": report.termination,
            "iterations_used": report.iterations_used,
        },
        "objective_gap": objective_gap,
        "h_gap": h_gap,
        "agree": agree,
    }
    run_report = build_run_report(
        "oracle",
        result,
        inputs=data["inputs"],
        config={"oracle": oracle_config.model_dump(), "solver": solver_config.model_dump(mode="json")},
        wall_time=time.perf_counter() - started,
    )
    _emit(run_report, config)
    return EXIT_OK


def _simulation_config(args, config: DeconvConfig) -> SimulationConfig:
    simulation = config.simulation
    noise = _overridden(
        simulation.noise,
        distribution=args.noise,
        shape=args.noise_shape,
        sigma=args.noise_sigma,
    )
    return _overridden(
        simulation,
        h_true=args.h_true,
        noise=noise.model_dump(),
        m_grid=args.m_grid,
        replicates=args.replicates,
        seed=args.seed,
        threads=args.threads,
        normality_m=args.normality_m,
        normality_replicates=args.normality_replicates,
        decomposition_samples=args.mc_samples,
        h_probe=args.h_probe,
    )


def cmd_simulate(args, config: DeconvConfig) -> int:
    started = time.perf_counter()
    simulation = _simulation_config(args, config)
    strategy = strategy_for_threads(simulation.threads)
    modes = ["consistency", "normality", "decomposition"] if args.mode == "all" else [args.mode]
    common = dict(
        h_true=simulation.h_true,
        input_law=simulation.input_law,
        noise=simulation.noise,
    )

    result: Dict[str, Any] = {}
    if "consistency" in modes:
        curve = consistency_experiment(
            m_grid=simulation.m_grid,
            replicates=simulation.replicates,
            seed=simulation.seed,
            config=simulation.solver,
            strategy=strategy,
            **common,
        )
        result["consistency"] = curve.to_dict()
    if "normality" in modes:
        normality = normality_experiment(
            m=simulation.normality_m,
            replicates=simulation.normality_replicates,
            seed=simulation.seed,
            config=simulation.solver,
            strategy=strategy,
            **common,
        )
        result["normality"] = normality.to_dict()
    if "decomposition" in modes:
        probe = simulation.h_probe or [0.5 * h for h in simulation.h_true]
        check = limit_criterion_decomposition_check(
            h_probe=probe,
            mc_samples=simulation.decomposition_samples,
            seed=simulation.seed,
            **common,
        )
        result["decomposition"] = {"h_probe": probe, **check.to_dict()}

    run_report = build_run_report(
        "simulate",
        result,
        config={"simulation": simulation.model_dump(mode="json"), "mode": args.mode},
        wall_time=time.perf_counter() - started,
    )
    _emit(run_report, config, args.out)
    return EXIT_OK


COMMANDS = {
    "check": cmd_check,
    "estimate": cmd_estimate,
    "oracle": cmd_oracle,
    "simulate": cmd_simulate,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point; returns the process exit status"""
    args = build_parser().parse_args(argv)
    try:
        config = _load_config(args.config)
        setup_logging(config.logging, args.log_level)
        if args.threads is not None and args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        return COMMANDS[args.command](args, config)
    except DeconvolutionError as e:
        logger.error(f"{type(e).__name__}: {e}")
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
