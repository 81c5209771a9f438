"""
gyrosym command-line entry point.

Usage:
    python app.py list-scenarios
    python app.py simulate lagrange-top --out runs/lagrange-top.csv
    python app.py check gyrostat --report gyrostat.yaml
    python app.py lemma1 f-alpha-plus-gradient
"""
import argparse
import logging
import sys
from typing import List, Optional

from gyrosym import __version__, config
from gyrosym.commands import check, lemma1, scenarios, simulate

COMMANDS = (simulate, check, lemma1, scenarios)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gyrosym",
        description="Rigid bodies with gyroscopic forces: simulation and area-integral analysis",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    parser.add_argument("--progress", action="store_true", help="show progress bars on stderr")
    parser.add_argument(
        "--scenario-dir", dest="scenario_dir", default=None,
        help=f"scenario directory (default: ${config.SCENARIO_DIR_ENV} or {config.SCENARIO_DIR})",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for command in COMMANDS:
        command.register(subparsers)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(asctime)s %(name)s %(levelname)s: %(message)s",
    )
    return args.handler(args)


if __name__ == "__main__":
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        print("\n\nOperation cancelled by user.")
        sys.exit(0)
    except Exception as e:
        print(f"\nError: {e}")
        import traceback
        traceback.print_exc()
        sys.exit(config.EXIT_FAILED)
