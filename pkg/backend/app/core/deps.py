"""
Shared helpers for CLI commands.
Resolve the run config, round and zone selections and the output directory
from parsed arguments.
"""
from argparse import ArgumentParser, Namespace
from pathlib import Path
from typing import Iterable, List, Optional

from app.core.exceptions import ConfigError
from app.schemas.run import STRATEGIES, RoundSpec, RunConfig, ZoneRunResult
from app.services.orchestrator_service import first_failure


# ============================================================================
# COMMON ARGUMENTS
# ============================================================================

class CliParser(ArgumentParser):
    """ArgumentParser whose usage errors surface as ConfigError (exit code 1)."""

    def error(self, message: str):
        raise ConfigError(f"{self.prog}: {message}")


def common_parser() -> ArgumentParser:
    """
    Parent parser carrying the flags every command accepts.

    Usage:
        sub = subparsers.add_parser("forecast", parents=[common_parser()])
    """
    parser = ArgumentParser(add_help=False)
    parser.add_argument("--config", type=Path, help="Run config JSON")
    parser.add_argument("--out", type=Path, help="Output directory (overrides the config)")
    parser.add_argument("--zones", nargs="+", help="Zone ids to run (default: all)")
    parser.add_argument("--rounds", nargs="+", type=int, help="Round ids to run (default: all)")
    parser.add_argument(
        "--strategy",
        nargs="+",
        choices=STRATEGIES,
        help="Strategies to produce (default: each round's own strategy)",
    )
    parser.add_argument("--seed", type=int, default=0, help="Seed for synthetic data")
    parser.add_argument("--log-level", default=None, help="Logging level (default: settings.LOG_LEVEL)")
    return parser


# ============================================================================
# CONFIG DEPENDENCIES
# ============================================================================

def load_run_config(args: Namespace) -> RunConfig:
    """
    Load the run config named by ``--config``.

    Raises:
        ConfigError: If --config is missing or the file is invalid
    """
    if args.config is None:
        raise ConfigError("--config is required for this command")
    return RunConfig.from_file(args.config)


def selected_rounds(config: RunConfig, args: Namespace) -> List[RoundSpec]:
    if not args.rounds:
        return list(config.rounds)
    return [config.round(round_id) for round_id in args.rounds]


def selected_zones(config: RunConfig, args: Namespace) -> Optional[List[str]]:
    if not args.zones:
        return None
    for zone_id in args.zones:
        config.zone(zone_id)
    return list(args.zones)


def output_dir(config: RunConfig, args: Namespace) -> Path:
    return Path(args.out) if args.out is not None else Path(config.output_dir)


# ============================================================================
# RESULTS
# ============================================================================

def results_exit_code(results: Iterable[ZoneRunResult]) -> int:
    """0 when every zone succeeded, else the exit code of the first failure."""
    failure = first_failure(results)
    return 0 if failure is None else failure.exit_code


def print_results(results: Iterable[ZoneRunResult]):
    for result in results:
        status = "ok" if result.success else f"FAILED ({result.error})"
        print(f"R{result.round_id} {result.zone_id}: {status} {result.message or ''}".rstrip())
        for name, path in result.outputs.items():
            print(f"    {name}: {path}")
