#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Check a deconvolution config file, or write one with every default filled in

Usage:
    python validate_config.py [--check config.json]
    python validate_config.py --create-sample PATH
"""

import argparse
import sys
from typing import List, Optional

from config_models import ConfigValidator, DeconvConfig

SUMMARY_FIELDS = {
    "solver": ["max_iters", "tol_kkt", "tol_objective", "init", "verify_mode"],
    "oracle": ["grid_depth", "grid_points"],
    "simulation": ["h_true", "m_grid", "replicates", "seed", "threads"],
    "logging": ["level", "file"],
}


def print_summary(config: DeconvConfig):
    """One line per setting that most often needs changing"""
    for section, names in SUMMARY_FIELDS.items():
        values = getattr(config, section)
        shown = ", ".join(f"{name}={getattr(values, name)!r}" for name in names)
        print(f"  [{section}] {shown}")
    noise = config.simulation.noise
    print(f"  [noise] {noise.distribution.value}")


def validate_config_file(config_path: str) -> bool:
    print(f"🔍 Checking {config_path}")
    result = ConfigValidator.validate_config_file(config_path)

    if not result["valid"]:
        print(f"❌ {len(result['errors'])} error(s):")
        for error in result["errors"]:
            print(f"  - {error}")
        return False

    print("✅ Configuration is valid!")
    print_summary(result["config"])
    for warning in result["warnings"]:
        print(f"⚠️ {warning}")
    return True


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(description="Validate nonneg-fir configuration files")
    group = parser.add_mutually_exclusive_group()
    group.add_argument("--check", metavar="CONFIG_FILE", default="config.json")
    group.add_argument("--create-sample", metavar="PATH", help="Write the default configuration")
    args = parser.parse_args(argv)

    if args.create_sample:
        if ConfigValidator.create_sample_config(args.create_sample):
            print(f"📝 Wrote defaults to {args.create_sample}")
            return 0
        print(f"❌ Could not write {args.create_sample}")
        return 1
    return 0 if validate_config_file(args.check) else 1


if __name__ == "__main__":
    sys.exit(main())
