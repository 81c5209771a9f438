"""
Command modules of the gyrosym CLI.

Each module exposes register(subparsers), which adds its sub-command and
binds a handler returning the process exit code.
"""
import argparse
import logging
from typing import Optional

from gyrosym import config
from gyrosym.core.dynamics import METHODS
from gyrosym.exceptions import GyroSymError, StepRejected

logger = logging.getLogger(__name__)


def exit_code_for(exc: BaseException) -> int:
    """Exit-code contract: 3 for rejected steps, 2 for other model errors, 1 otherwise."""
    if isinstance(exc, StepRejected):
        return config.EXIT_STEP_REJECTED
    if isinstance(exc, GyroSymError):
        return config.EXIT_INVALID
    return config.EXIT_FAILED


def report_error(exc: BaseException, context: Optional[str] = None) -> int:
    code = exit_code_for(exc)
    prefix = f"{context}: " if context else ""
    print(f"\nError: {prefix}{type(exc).__name__}: {exc}")
    logger.debug("exit code %d for %r", code, exc)
    return code


def add_override_arguments(parser: argparse.ArgumentParser) -> None:
    """Integrator overrides shared by the simulation commands."""
    parser.add_argument("--dt", type=float, help="step size")
    parser.add_argument("--t-end", dest="t_end", type=float, help="final time")
    parser.add_argument("--method", choices=METHODS, help="integration method")
    parser.add_argument("--seed", type=int, help="seed for random initial attitudes")


def apply_overrides(spec, args: argparse.Namespace):
    return spec.with_overrides(
        dt=getattr(args, "dt", None),
        t_end=getattr(args, "t_end", None),
        method=getattr(args, "method", None),
        seed=getattr(args, "seed", None),
    )
