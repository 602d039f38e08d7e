"""
LoadShuffle command-line entry point.
"""
from argparse import ArgumentParser
from typing import List, Optional
import logging
import sys

from app.api.commands import COMMAND_GROUPS
from app.core.config import settings
from app.core.deps import CliParser, common_parser
from app.core.exceptions import LoadForecastError
from app.core.logging import setup_logging

logger = logging.getLogger(__name__)


def build_parser() -> ArgumentParser:
    parser = CliParser(
        prog="loadshuffle",
        description="Probabilistic day-ahead to month-ahead load forecasts from shuffled temperature scenarios",
    )
    parser.add_argument("--version", action="version", version=f"{settings.APP_NAME} {settings.APP_VERSION}")
    subparsers = parser.add_subparsers(dest="command", required=True)

    # ========================================================================
    # COMMANDS
    # ========================================================================

    parents = [common_parser()]
    for group in COMMAND_GROUPS:
        group.register(subparsers, parents)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """
    Run one command.

    Returns:
        Exit code: 0 success, 1 config error, 2 data error, 3 modelling error
    """
    setup_logging()
    try:
        args = build_parser().parse_args(argv)
        setup_logging(args.log_level)
        return args.handler(args)
    except LoadForecastError as e:
        logger.error(f"{e.error}: {e.message}")
        print(f"{e.error}: {e.message}", file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
