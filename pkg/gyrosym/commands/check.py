"""
check: closedness, invariance and area-integral verdict for a scenario.

Usage:
    gyrosym check gyrostat
    gyrosym check my.yaml --report report.yaml --table f.csv --resolution 90 180
"""
import argparse
import logging
from typing import Any, Dict, Optional, Tuple

import numpy as np

from gyrosym import config
from gyrosym.commands import apply_overrides, report_error
from gyrosym.core.forms import max_closedness_residual
from gyrosym.core.symmetry import DecompositionResult, check_psi_invariance, decompose_kappa
from gyrosym.utils.output import format_report, potential_table, report_yaml, save_report, save_table
from gyrosym.utils.scenarios import ScenarioSpec, build_system, load_scenario

logger = logging.getLogger(__name__)

# A reconstructed f counts as linear when the fit error is below this
LINEAR_FIT_TOL = 1e-6
F_NOTE = "F is the radial part k . alpha; it need not vanish when the decomposition exists"


def linear_fit(result: DecompositionResult) -> Dict[str, float]:
    """Least-squares fit f ~ offset + c1 a1 + c2 a2 + c3 a3 over the mesh nodes."""
    theta, phi = np.meshgrid(result.grid["theta"], result.grid["phi"], indexing="ij")
    alpha = np.stack([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)], axis=-1)
    design = np.column_stack([np.ones(theta.size), alpha.reshape(-1, 3)])
    values = np.asarray(result.grid["f"]).ravel()
    coefficients, *_ = np.linalg.lstsq(design, values, rcond=None)
    error = float(np.max(np.abs(design @ coefficients - values)))
    return {
        "offset": float(coefficients[0]),
        "a1": float(coefficients[1]),
        "a2": float(coefficients[2]),
        "a3": float(coefficients[3]),
        "max_error": error,
    }


def area_integral_formula(inertia, fit: Optional[Dict[str, float]]) -> str:
    """The G formula line, with f written out when it is linear."""
    kinetic = " + ".join(f"{A:g}*w{i + 1}*a{i + 1}" for i, A in enumerate(inertia))
    if fit is None or fit["max_error"] > LINEAR_FIT_TOL:
        return f"G = {kinetic} + f(a)"
    terms = [f"{fit[name]:.6g}*{name}" for name in ("a1", "a2", "a3") if abs(fit[name]) > LINEAR_FIT_TOL]
    return f"G = {kinetic}" + "".join(f" + {t}" for t in terms) + " + const"


def run_check(
    spec: ScenarioSpec,
    resolution: Tuple[int, int] = config.DEFAULT_GRID,
    report_path: Optional[str] = None,
    table_path: Optional[str] = None,
) -> Dict[str, Any]:
    """
    Build the structured check report of a scenario.

    Raises:
        ValidationError: the scenario violates a model invariant
    """
    system = build_system(spec)
    residual, worst = max_closedness_residual(system.kappa)
    report: Dict[str, Any] = {
        "scenario": spec.name,
        "closedness": {
            "residual": residual,
            "tolerance": spec.tau_closed,
            "closed": residual <= spec.tau_closed,
            "worst_point": [float(x) for x in worst],
        },
        "invariance": {
            "potential": check_psi_invariance(system.potential.at, samples=200),
            **{f"k{i + 1}": check_psi_invariance(k.at, samples=200) for i, k in enumerate(system.kappa.k)},
        },
    }

    result = decompose_kappa(system.kappa, resolution=resolution)
    decomposition = result.summary()
    F_values = np.asarray(result.grid["F"])
    decomposition["F_range"] = [float(F_values.min()), float(F_values.max())]
    decomposition["F_note"] = F_NOTE
    fit = linear_fit(result)
    decomposition["f_linear_fit"] = fit
    report["decomposition"] = decomposition
    if result.exists:
        report["area_integral"] = area_integral_formula(spec.inertia, fit)
    else:
        report["area_integral"] = "does not exist"

    if table_path:
        report["table"] = save_table(potential_table(result), table_path)
    if report_path:
        save_report(report, report_path)
        logger.info("report written to %s", report_path)
    return report


def handle(args: argparse.Namespace) -> int:
    try:
        spec = apply_overrides(load_scenario(args.spec, args.scenario_dir), args)
        report = run_check(spec, tuple(args.resolution), args.report, args.table)
    except Exception as exc:
        return report_error(exc, args.spec)
    if args.yaml:
        print(report_yaml(report), end="")
    else:
        print(format_report(f"CHECK: {spec.name}", report))
        verdict = report["decomposition"]["verdict"]
        print(f"\nVerdict: {verdict}")
        print(f"  {report['area_integral']}")
    return config.EXIT_OK


def register(subparsers) -> None:
    parser = subparsers.add_parser("check", help="area-integral verdict and diagnostics for a scenario")
    parser.add_argument("spec", metavar="SPEC", help="scenario file or built-in scenario name")
    parser.add_argument("--report", help="write the machine-readable report (YAML) here")
    parser.add_argument("--table", help="write F and f at the mesh nodes (CSV) here")
    parser.add_argument(
        "--resolution", nargs=2, type=int, default=list(config.DEFAULT_GRID),
        metavar=("NLAT", "NLON"), help="latitude and longitude cells of the mesh",
    )
    parser.add_argument("--yaml", action="store_true", help="print the YAML report instead of text")
    parser.set_defaults(handler=handle)
