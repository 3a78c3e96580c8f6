"""Command line entry point.

Exit codes: 0 success, 1 config validation failure, 2 runtime failure
(missing artifacts, failed checks, simulation divergence).  Validation and
runtime errors print a one-line JSON report to stderr so callers can parse
the failure without scraping logs.
"""

from __future__ import annotations

import argparse
import json
import sys

from ..errors import (
    ConfigError,
    ContractViolation,
    MissingArtifact,
    SimulationDivergence,
    SingularMatrixError,
)
from . import runner
from .config import load_config

COMMANDS = {
    "simulate": runner.run_simulate,
    "estimate": runner.run_estimate,
    "analyze": runner.run_analyze,
    "sweep": runner.run_sweep,
    "check-graph": runner.run_check_graph,
    "verify": runner.run_verify,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dilute-rls",
        description="distributed least squares with growing truncation dimensions",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        cmd = sub.add_parser(name)
        cmd.add_argument(
            "config_path",
            nargs="?",
            default=None,
            metavar="config",
            help="experiment config file",
        )
        cmd.add_argument(
            "--config", default=None, help="experiment config file (same as positional)"
        )
        cmd.add_argument("--out", default=None, help="override output directory")
        cmd.add_argument(
            "--threads",
            type=int,
            default=None,
            help="worker threads for sweep (fallback: DILUTE_RLS_THREADS)",
        )
        cmd.add_argument(
            "--seed-override",
            type=int,
            default=None,
            help="replace the config's seed list with this single seed",
        )
    return parser


def _config_path(args) -> str:
    if args.config and args.config_path and args.config != args.config_path:
        raise ConfigError(
            "config path given twice with different values", keys=["config"]
        )
    path = args.config or args.config_path
    if path is None:
        raise ConfigError("missing config path", keys=["config"])
    return path


def _error_report(kind: str, exc: Exception) -> str:
    payload = {"error": kind, "message": str(exc)}
    if isinstance(exc, ConfigError) and exc.keys:
        payload["keys"] = list(exc.keys)
    return json.dumps(payload, sort_keys=True)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(_config_path(args))
        cfg = cfg.with_overrides(
            out=args.out,
            threads=args.threads,
            seeds=args.seed_override,
        )
        result = COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(_error_report("validation", exc), file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(_error_report("validation", exc), file=sys.stderr)
        return 1
    except (
        MissingArtifact,
        ContractViolation,
        SimulationDivergence,
        SingularMatrixError,
    ) as exc:
        print(_error_report("runtime", exc), file=sys.stderr)
        return 2
    for line in result.get("report_lines", []):
        print(line)
    print(result["summary"])
    return result["exit"]


if __name__ == "__main__":
    sys.exit(main())
