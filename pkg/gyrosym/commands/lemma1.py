"""
lemma1: numerical check of d/dt (A w . alpha) = (alpha x k) . w.

The scenario is integrated once with output every h/4; the centred-difference
residual is evaluated on the sub-sampled series with spacing h, h/2 and h/4
and a convergence order is fitted. The check passes when the order is at least
LEMMA1_MIN_ORDER, or when every residual sits below the noise floor (the
momentum function is then conserved outright).

Usage:
    gyrosym lemma1 f-alpha-plus-gradient --stride 0.04
"""
import argparse
import logging
from typing import Any, Dict, Optional

from gyrosym import config
from gyrosym.commands import add_override_arguments, apply_overrides, report_error
from gyrosym.core.dynamics import IntegratorConfig, area_rate_residual, convergence_order, integrate, lemma1_residual
from gyrosym.core.symmetry import decompose_kappa
from gyrosym.exceptions import ValidationError
from gyrosym.utils.output import format_report, save_report
from gyrosym.utils.scenarios import ScenarioSpec, build_system, initial_state, load_scenario

logger = logging.getLogger(__name__)

SUBSAMPLING = (4, 2, 1)


def run_lemma1(spec: ScenarioSpec, stride: Optional[float] = None, progress: bool = False) -> Dict[str, Any]:
    """
    Residuals of the momentum-rate identity at strides h, h/2, h/4.

    Args:
        spec: Scenario
        stride: Coarsest output spacing h in time units; must be a multiple of 4 dt

    Returns:
        Report with strides, residuals, fitted order and the pass flag; when the
        area integral is certified, also the residuals of dG/dt = 0
    """
    system = build_system(spec)
    state = initial_state(spec)
    dt = spec.integrator.dt
    steps = config.LEMMA1_BASE_STRIDE if stride is None else int(round(stride / dt))
    if steps < 4 or steps % 4 != 0:
        raise ValidationError("stride", f"stride must be a positive multiple of 4*dt, got {steps} steps")

    cfg = IntegratorConfig(
        dt=dt,
        t_end=min(spec.integrator.t_end, config.LEMMA1_HORIZON),
        stride=steps // 4,
        method=spec.integrator.method,
        tau_orth=spec.integrator.tau_orth,
    )
    trajectory = integrate(system, state, cfg, progress=progress)

    strides = [sub * cfg.stride * dt for sub in SUBSAMPLING]
    residuals = [lemma1_residual(system, trajectory[::sub]) for sub in SUBSAMPLING]
    order = convergence_order(residuals, strides)
    passed = order >= config.LEMMA1_MIN_ORDER or max(residuals) < config.NOISE_FLOOR
    report: Dict[str, Any] = {
        "scenario": spec.name,
        "strides": strides,
        "residuals": residuals,
        "order": order,
        "passed": bool(passed),
    }

    if system.closed:
        result = decompose_kappa(system.kappa)
        if result.exists:
            rates = [area_rate_residual(system, trajectory[::sub], result.f) for sub in SUBSAMPLING]
            report["area_rate"] = {"residuals": rates, "order": convergence_order(rates, strides)}
    logger.info("lemma1 %s: order %.3f, passed=%s", spec.name, order, passed)
    return report


def handle(args: argparse.Namespace) -> int:
    try:
        spec = apply_overrides(load_scenario(args.spec, args.scenario_dir), args)
        report = run_lemma1(spec, stride=args.stride, progress=args.progress)
    except Exception as exc:
        return report_error(exc, args.spec)
    print(format_report(f"LEMMA 1: {spec.name}", report))
    for h, r in zip(report["strides"], report["residuals"]):
        print(f"  h = {h:<10g} residual = {r:.3e}")
    print(f"\nFitted order: {report['order']:.3f} -> {'PASS' if report['passed'] else 'FAIL'}")
    if args.report:
        save_report(report, args.report)
    return config.EXIT_OK if report["passed"] else config.EXIT_FAILED


def register(subparsers) -> None:
    parser = subparsers.add_parser("lemma1", help="verify the momentum-rate identity along a trajectory")
    parser.add_argument("spec", metavar="SPEC", help="scenario file or built-in scenario name")
    parser.add_argument("--stride", type=float, help="coarsest output spacing h (multiple of 4*dt)")
    parser.add_argument("--report", help="write the YAML report here")
    add_override_arguments(parser)
    parser.set_defaults(handler=handle)
