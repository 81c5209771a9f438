"""
simulate: integrate one or more scenarios and write their trajectories to CSV.

Usage:
    gyrosym simulate lagrange-top --out runs/lagrange-top.csv
    gyrosym simulate gyrostat free-body --out runs/ --jobs 2
"""
import argparse
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from gyrosym import config
from gyrosym.commands import add_override_arguments, report_error
from gyrosym.core.dynamics import drift_summary, integrate, trajectory_frame
from gyrosym.core.symmetry import decompose_kappa
from gyrosym.utils.output import save_table
from gyrosym.utils.scenarios import ScenarioSpec, build_system, initial_state, load_scenario

logger = logging.getLogger(__name__)

NO_AREA_NOTE = "area integral does not exist"


def run_simulate(
    spec: ScenarioSpec,
    out_path: str,
    progress: bool = False,
    resolution: Tuple[int, int] = config.DEFAULT_GRID,
) -> int:
    """
    Integrate a scenario and save t,w1,w2,w3,a1,a2,a3,H,[G],orth_err.

    The G column is written only when the decomposition of kappa certifies the
    area integral; otherwise a note is printed instead.

    Returns:
        Exit code (0 success, 2 invalid scenario, 3 rejected step)
    """
    print("=" * 70)
    print(f"SIMULATE: {spec.name}")
    print("=" * 70)
    try:
        print("\n[1/3] Building system...")
        system = build_system(spec)
        state = initial_state(spec)

        f = None
        note = None
        if system.psi_invariant:
            result = decompose_kappa(system.kappa, resolution=resolution)
            if result.exists:
                f = result.f
            else:
                note = NO_AREA_NOTE
                logger.info("%s: max circulation %.3e, G column omitted", spec.name, result.max_circulation)
        else:
            note = NO_AREA_NOTE

        cfg = spec.integrator
        print(f"\n[2/3] Integrating: method={cfg.resolve_method(system)} dt={cfg.dt:g} t_end={cfg.t_end:g}")
        points = integrate(system, state, cfg, f=f, progress=progress)

        print("\n[3/3] Saving trajectory...")
        filepath = save_table(trajectory_frame(points), out_path)
    except Exception as exc:
        return report_error(exc, spec.name)

    summary = drift_summary(points)
    print(f"\nTrajectory saved to: {filepath}")
    print(f"  Points:            {len(points):,}")
    print(f"  max |dH|/|H(0)|:   {summary['energy_drift']:.3e}")
    if summary["area_drift"] is not None:
        print(f"  max |dG|/max(1,|G(0)|): {summary['area_drift']:.3e}")
    print(f"  max orth error:    {summary['orth_err']:.3e}")
    if note:
        print(f"  Note: {note}; G column omitted")
    return config.EXIT_OK


def _simulate_worker(ref: str, scenario_dir: Optional[str], overrides: Dict, out_path: str) -> int:
    try:
        spec = load_scenario(ref, scenario_dir).with_overrides(**overrides)
    except Exception as exc:
        return report_error(exc, ref)
    return run_simulate(spec, out_path)


def simulate_many(
    refs: List[str],
    out: str,
    jobs: int = 1,
    overrides: Optional[Dict] = None,
    scenario_dir: Optional[str] = None,
    progress: bool = False,
) -> int:
    """
    Run several scenarios; `out` is a directory receiving <name>.csv per scenario.

    Returns:
        The largest exit code over all scenarios
    """
    overrides = overrides or {}
    specs = []
    for ref in refs:
        try:
            specs.append(load_scenario(ref, scenario_dir).with_overrides(**overrides))
        except Exception as exc:
            return report_error(exc, ref)

    if len(specs) == 1 and not (out.endswith(os.sep) or os.path.isdir(out)):
        return run_simulate(specs[0], out, progress=progress)

    names = [spec.name for spec in specs]
    duplicates = sorted({n for n in names if names.count(n) > 1})
    if duplicates:
        print(f"\nError: output paths must be distinct; duplicate scenario names {duplicates}")
        return config.EXIT_INVALID
    Path(out).mkdir(parents=True, exist_ok=True)
    targets = [str(Path(out) / f"{name}.csv") for name in names]

    if jobs <= 1:
        codes = [run_simulate(spec, target, progress=progress) for spec, target in zip(specs, targets)]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [
                pool.submit(_simulate_worker, ref, scenario_dir, overrides, target)
                for ref, target in zip(refs, targets)
            ]
            codes = [future.result() for future in futures]
    return max(codes)


def handle(args: argparse.Namespace) -> int:
    overrides = {
        key: getattr(args, key) for key in ("dt", "t_end", "method", "seed") if getattr(args, key) is not None
    }
    return simulate_many(
        args.specs, args.out, jobs=args.jobs, overrides=overrides,
        scenario_dir=args.scenario_dir, progress=args.progress,
    )


def register(subparsers) -> None:
    parser = subparsers.add_parser("simulate", help="integrate scenarios and write CSV trajectories")
    parser.add_argument("specs", nargs="+", metavar="SPEC", help="scenario file or built-in scenario name")
    parser.add_argument("--out", required=True, help="CSV path, or a directory for several scenarios")
    parser.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    add_override_arguments(parser)
    parser.set_defaults(handler=handle)
