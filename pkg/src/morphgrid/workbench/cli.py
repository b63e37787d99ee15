"""Command-line interface.

Exit codes: 0 on success, 1 on input problems (bad files, schema, missing
references), 2 on numerical failures (non-convergence, singular systems,
unbracketed roots).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from ..accuracy import format_report_table
from ..dma import SmootherConfig
from ..errors import MorphGridError
from ..grid import MeshConfig
from ..shooter import ShooterConfig
from . import pipeline

PROJECT_ENV = "MORPHGRID_PROJECT"


def _load_config(path) -> dict:
    if path is None:
        return {}
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise ValueError(f"{path}: config must be a JSON object")
    return doc


def _smoother(cfg: dict) -> SmootherConfig:
    return SmootherConfig(**cfg.get("smoother", {}))


def _mesh(cfg: dict, args) -> MeshConfig:
    options = dict(cfg.get("mesh", {}))
    if getattr(args, "segments", None) is not None:
        options["segments_per_member"] = args.segments
    return MeshConfig(**options)


def _solver(cfg: dict):
    from ..sim import SolverConfig

    return SolverConfig(**cfg.get("solver", {}))


def _cmd_ingest(args) -> int:
    cfg = _load_config(args.config)
    summary = pipeline.run_ingest(args.input, args.out, smooth=args.smooth,
                                  split_cycles=args.split_cycles,
                                  smoother=_smoother(cfg))
    for path in summary["written"]:
        print(path)
    return 0


def _cmd_calibrate(args) -> int:
    summary = pipeline.run_calibrate(
        args.name, args.loading, args.unloading, args.out,
        sweep_csv=args.sweep, alpha_t=args.alpha_t, poisson=args.poisson,
        density=args.density, prony_terms=args.prony_terms,
        fit_damage=args.fit_damage,
    )
    print(f"material card: {summary['written'][0]}")
    print(f"viscoelastic: {summary['viscoelastic_enabled']}")
    for sigma0, plastic in summary["plasticity_table"]:
        print(f"plasticity: sigma0={sigma0:.6g} MPa  plastic_strain={plastic:.6g}")
    return 0


def _cmd_shoot(args) -> int:
    cfg = _load_config(args.config)
    shooter_options = dict(cfg.get("shooter", {}))
    if args.tol_mm is not None:
        shooter_options["tol_mm"] = args.tol_mm
    if args.max_iter is not None:
        shooter_options["max_iter"] = args.max_iter
    if args.frozen_curve:
        shooter_options["frozen_curve"] = True
    if args.high_fidelity:
        shooter_options["high_fidelity"] = True
    doc = pipeline.run_shoot(
        args.card, args.constraint_card, args.observations, args.out,
        length=args.length, width=args.width, total_thickness=args.thickness,
        actuator_thickness=args.actuator_thickness,
        config=ShooterConfig(**shooter_options),
    )
    status = "converged" if doc["converged"] else "NOT converged"
    print(f"sigma0 = {doc['sigma0_mpa']:.6g} MPa ({status}, "
          f"{doc['iterations']} trials, residual {doc['residual_mm']:.3g} mm)")
    print(doc["written"][0])
    return 0


def _cmd_simulate(args) -> int:
    cfg = _load_config(args.config)
    summary = pipeline.run_simulate(args.design, args.out,
                                    mesh_config=_mesh(cfg, args),
                                    solver_config=_solver(cfg))
    for path in summary["written"]:
        print(path)
    return 0


def _cmd_measure(args) -> int:
    summary = pipeline.run_measure(args.state, args.measurements, args.out,
                                   mesh_path=args.mesh, level=args.level)
    low, high = summary["ci95"]
    print(f"n = {summary['n']}, mean accuracy = {summary['mean_accuracy']:.4f}, "
          f"CI = ({low:.3f}, {high:.3f})")
    print(summary["written"][0])
    return 0


def _cmd_report(args) -> int:
    report = pipeline.run_report(args.measurements, out=args.out, level=args.level)
    sys.stdout.write(format_report_table(report))
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .api import create_app

    root = args.project or os.environ.get(PROJECT_ENV)
    if not root:
        raise ValueError(f"no project directory: pass --project or set {PROJECT_ENV}")
    app = create_app(Path(root), max_workers=args.workers)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="morphgrid",
        description="Forward design of self-morphing bi-layer grid structures",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate a raw DMA export into canonical curves")
    p.add_argument("input", help="raw CSV (stress-strain or frequency sweep)")
    p.add_argument("--out", required=True, help="output file (or directory with --split-cycles)")
    p.add_argument("--smooth", action="store_true", help="apply penalized-spline smoothing")
    p.add_argument("--split-cycles", action="store_true",
                   help="separate a cyclic record into envelope and unloading branches")
    p.add_argument("--config", help="JSON config file")
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("calibrate", help="build a material card from canonical curves")
    p.add_argument("--name", required=True)
    p.add_argument("--loading", required=True, help="main loading curve CSV")
    p.add_argument("--unloading", action="append", default=[],
                   help="unloading curve CSV (repeatable)")
    p.add_argument("--sweep", help="frequency sweep CSV")
    p.add_argument("--alpha-t", type=float, required=True, dest="alpha_t",
                   help="linear thermal expansion per degree C")
    p.add_argument("--poisson", type=float, required=True)
    p.add_argument("--density", type=float, default=1240.0, help="kg/m^3")
    p.add_argument("--prony-terms", type=int, default=8, dest="prony_terms")
    p.add_argument("--fit-damage", action="store_true", dest="fit_damage")
    p.add_argument("--out", required=True, help="output .matcard.json")
    p.set_defaults(func=_cmd_calibrate)

    p = sub.add_parser("shoot", help="identify residual stress from triggering measurements")
    p.add_argument("--card", required=True, help="actuator .matcard.json")
    p.add_argument("--constraint-card", required=True, dest="constraint_card")
    p.add_argument("--observations", required=True, help=".obs.csv file")
    p.add_argument("--out", required=True, help="output .shoot.json")
    p.add_argument("--length", type=float, default=100.0)
    p.add_argument("--width", type=float, default=7.2)
    p.add_argument("--thickness", type=float, default=4.0)
    p.add_argument("--actuator-thickness", type=float, default=2.0,
                   dest="actuator_thickness")
    p.add_argument("--tol-mm", type=float, default=None, dest="tol_mm")
    p.add_argument("--max-iter", type=int, default=None, dest="max_iter")
    p.add_argument("--frozen-curve", action="store_true", dest="frozen_curve",
                   help="uncoupled baseline: pin the unloading curve selection")
    p.add_argument("--high-fidelity", action="store_true", dest="high_fidelity",
                   help="simulate trials on the beam solver, with gravity")
    p.add_argument("--config", help="JSON config file")
    p.set_defaults(func=_cmd_shoot)

    p = sub.add_parser("simulate", help="run the two-stage simulation of a design")
    p.add_argument("--design", required=True, help=".grid.json design file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--segments", type=int, default=None,
                   help="segments per member (default 8)")
    p.add_argument("--config", help="JSON config file")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("measure", help="measure point pairs on a stored state")
    p.add_argument("--state", required=True, help="stage state JSON")
    p.add_argument("--measurements", required=True, help="measurement CSV")
    p.add_argument("--mesh", help="mesh JSON (needed for member@fraction references)")
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--out", required=True, help="output report JSON")
    p.set_defaults(func=_cmd_measure)

    p = sub.add_parser("report", help="pool measured pairs into one accuracy report")
    p.add_argument("measurements", nargs="+", help="measurement CSVs with pairs")
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--out", help="also write the report JSON here")
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("serve", help="start the local HTTP API")
    p.add_argument("--project", help=f"project directory (default ${PROJECT_ENV})")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--workers", type=int, default=2, help="max parallel jobs")
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except MorphGridError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2 if exc.category == "numerical" else 1
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
