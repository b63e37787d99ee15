"""The forward-design pipeline steps, shared by the CLI and the HTTP API.

Each step reads and writes files; everything written is deterministic
byte-for-byte for identical inputs (sorted JSON keys, repr-exact floats, no
timestamps).
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Mapping, Sequence

from ..accuracy import (
    AccuracyReport,
    PairRef,
    PointPair,
    build_report,
    measure_state,
    read_measurement_csv,
    report_to_json,
    segments_from_doc,
)
from ..dma import (
    DmaCurve,
    FREQUENCY_SWEEP_HEADER,
    SmootherConfig,
    STRESS_STRAIN_HEADER,
    extract_main_loading_curve,
    parse_dma_csv,
    segment_cycles,
    smooth_pspline,
    write_dma_csv,
)
from ..errors import EmptyFile, InputError, InvalidDocument, MalformedRow, SchemaMismatch
from ..grid import BendingUnitSpec, MeshConfig, load_design, mesh_to_dict
from ..materials import (
    MaterialCard,
    calibrate_card,
    load_material_card,
    save_material_card,
)
from ..shooter import ShooterConfig, TriggeringObservation, shoot_residual_stress

PIPELINE_FORMAT_VERSION = 1
OBSERVATION_HEADER = ["actuator_ratio", "distance_mm", "temp_c"]


def _write_json(path: Path, doc: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _sniff_schema(path) -> str:
    with open(path, newline="", encoding="utf-8") as fh:
        first = fh.readline()
    header = [c.strip() for c in first.strip().split(",")]
    if header == FREQUENCY_SWEEP_HEADER:
        return "frequency_sweep"
    if header == STRESS_STRAIN_HEADER:
        return "stress_strain"
    raise SchemaMismatch(f"{path}: header matches no known DMA layout: {header}")


def run_ingest(input_path, out: Path, *, smooth: bool = False,
               split_cycles: bool = False,
               smoother: SmootherConfig = SmootherConfig()) -> dict:
    """Validate a raw DMA export and write canonical curve files.

    ``out`` is a file for single-curve mode, a directory when
    ``split_cycles`` separates a cyclic record into its loading envelope and
    unloading branches.
    """
    input_path = Path(input_path)
    out = Path(out)
    schema = _sniff_schema(input_path)
    if schema == "frequency_sweep":
        if split_cycles:
            raise InputError("cannot split cycles of a frequency sweep")
        sweep = parse_dma_csv(input_path, "frequency_sweep")
        out.parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(FREQUENCY_SWEEP_HEADER)
            for row in zip(sweep.freq_hz, sweep.storage_mpa, sweep.loss_mpa,
                           sweep.tan_delta, sweep.pre_strain):
                writer.writerow([repr(float(v)) for v in row])
        return {"schema": schema, "points": len(sweep.freq_hz),
                "max_tan_delta": sweep.max_tan_delta, "written": [str(out)]}

    curve = parse_dma_csv(input_path, "stress_strain")
    if split_cycles:
        cycles = segment_cycles(curve)
        out.mkdir(parents=True, exist_ok=True)
        written = []
        stem = input_path.stem
        envelope = extract_main_loading_curve(cycles)
        if smooth:
            envelope = smooth_pspline(envelope, smoother)
        env_path = out / f"{stem}_loading.csv"
        write_dma_csv(envelope, env_path)
        written.append(str(env_path))
        for k, unloading in enumerate(cycles.unloading):
            p = out / f"{stem}_unloading_{k}.csv"
            write_dma_csv(smooth_pspline(unloading, smoother) if smooth else unloading, p)
            written.append(str(p))
        return {"schema": schema, "points": len(curve.strain),
                "cycles": len(cycles.unloading), "written": written}
    if smooth:
        curve = smooth_pspline(curve, smoother)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_dma_csv(curve, out)
    return {"schema": schema, "points": len(curve.strain),
            "classified_as": curve.kind.value, "written": [str(out)]}


def run_calibrate(name: str, loading_csv, unloading_csvs: Sequence, out: Path, *,
                  sweep_csv=None, alpha_t: float, poisson: float,
                  density: float = 1240.0, prony_terms: int = 8,
                  fit_damage: bool = False) -> dict:
    """Build and save a material card from canonical curve files."""
    loading = parse_dma_csv(loading_csv, "stress_strain")
    unloading: list[DmaCurve] = [parse_dma_csv(p, "stress_strain") for p in unloading_csvs]
    sweep = parse_dma_csv(sweep_csv, "frequency_sweep") if sweep_csv else None
    card = calibrate_card(name, loading, unloading, sweep, alpha_t=alpha_t,
                          poisson=poisson, density=density, prony_terms=prony_terms,
                          fit_damage=fit_damage)
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_material_card(card, out)
    summary = {
        "name": name,
        "viscoelastic_enabled": card.viscoelastic_enabled,
        "plasticity_table": [list(row) for row in card.plasticity.rows]
        if card.plasticity else [],
        "written": [str(out)],
    }
    if card.prony is not None:
        summary["prony_terms"] = len(card.prony.terms)
    return summary


def read_observation_csv(path) -> list[tuple[float, float, float]]:
    """Rows of (actuator_ratio, distance_mm, temp_c)."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise EmptyFile(f"{path}: no rows")
    header = [c.strip() for c in rows[0]]
    if header != OBSERVATION_HEADER:
        raise SchemaMismatch(f"{path}: expected header {OBSERVATION_HEADER}, found {header}")
    out = []
    for i, row in enumerate(rows[1:]):
        try:
            out.append((float(row[0]), float(row[1]), float(row[2])))
        except (IndexError, ValueError) as exc:
            raise MalformedRow(i + 2, f"{path}: {exc}") from exc
    return out


def run_shoot(card_path, constraint_card_path, observations_csv, out: Path, *,
              length: float = 100.0, width: float = 7.2,
              total_thickness: float = 4.0, actuator_thickness: float = 2.0,
              config: ShooterConfig = ShooterConfig()) -> dict:
    """Identify the residual stress from a triggering observation file."""
    actuator = load_material_card(card_path)
    constraint = load_material_card(constraint_card_path)
    cards: Mapping[str, MaterialCard] = {actuator.name: actuator,
                                         constraint.name: constraint}
    template = BendingUnitSpec(
        length=length, width=width, total_thickness=total_thickness,
        actuator_thickness=actuator_thickness, actuator_ratio=1.0,
        actuator_material=actuator.name, constraint_material=constraint.name,
    )
    observations = [
        TriggeringObservation(actuator_ratio=ratio, measured_end_distance=dist,
                              geometry=template, temperature=temp)
        for ratio, dist, temp in read_observation_csv(observations_csv)
    ]
    result = shoot_residual_stress(observations, cards, config)
    out = Path(out)
    doc = {
        "format_version": PIPELINE_FORMAT_VERSION,
        "kind": "shoot_result",
        "sigma0_mpa": result.sigma0,
        "residual_mm": result.residual,
        "iterations": result.iterations,
        "converged": result.converged,
        "history": [[s, d] for s, d in result.history],
        "actuator_material": actuator.name,
        "constraint_material": constraint.name,
    }
    _write_json(out, doc)
    doc["written"] = [str(out)]
    return doc


def _load_design_cards(design_path) -> tuple:
    design_path = Path(design_path)
    design, materials = load_design(design_path)
    needed = set()
    for m in design.members:
        if isinstance(m.spec, BendingUnitSpec):
            needed.add(m.spec.actuator_material)
            needed.add(m.spec.constraint_material)
        else:
            needed.add(m.spec.material)
    cards = {}
    for name in sorted(needed):
        if name not in materials:
            raise InvalidDocument(
                f"{design_path}: member material {name!r} missing from the materials map"
            )
        card_path = design_path.parent / materials[name]
        cards[name] = load_material_card(card_path)
    return design, cards


def run_simulate(design_path, out_dir, *, mesh_config: MeshConfig = MeshConfig(),
                 solver_config=None) -> dict:
    """Run both stages on a design file and write the result states."""
    from ..sim import SolverConfig, sequential_simulate, state_to_dict
    from ..sim.sequence import export_state_obj

    design, cards = _load_design_cards(design_path)
    if solver_config is None:
        solver_config = SolverConfig()
    result = sequential_simulate(design, cards, mesh_config, solver_config)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for stage, state in (("a", result.stage_a), ("b", result.stage_b)):
        path = out_dir / f"stage_{stage}.state.json"
        _write_json(path, state_to_dict(state))
        written.append(str(path))
        obj_path = out_dir / f"stage_{stage}.obj"
        obj_path.write_text(export_state_obj(state, result.system), encoding="utf-8")
        written.append(str(obj_path))
    mesh_path = out_dir / "mesh.json"
    _write_json(mesh_path, mesh_to_dict(result.mesh))
    written.append(str(mesh_path))
    summary = {
        "format_version": PIPELINE_FORMAT_VERSION,
        "kind": "simulation_summary",
        "stages": ["a", "b"],
        "newton_iterations": {
            "a": list(result.stage_a.newton_iterations),
            "b": list(result.stage_b.newton_iterations),
        },
        "written": written,
    }
    _write_json(out_dir / "summary.json", {k: v for k, v in summary.items()
                                           if k != "written"})
    summary["written"] = written + [str(out_dir / "summary.json")]
    return summary


def run_measure(state_path, measurements_csv, out: Path, *, mesh_path=None,
                level: float = 0.95) -> dict:
    """Measure point pairs on a stored state and write an accuracy report."""
    from ..sim.solver import state_from_dict

    entries = read_measurement_csv(measurements_csv)
    if entries and isinstance(entries[0], PairRef):
        with open(state_path, encoding="utf-8") as fh:
            state = state_from_dict(json.load(fh))
        segments = None
        if mesh_path is not None:
            with open(mesh_path, encoding="utf-8") as fh:
                segments = segments_from_doc(json.load(fh))
        pairs = measure_state(state, entries, segments)
    else:
        pairs = entries
    report = build_report(pairs, level)
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(report_to_json(report), encoding="utf-8")
    return {"n": report.n, "mean_accuracy": report.mean_accuracy,
            "ci95": list(report.ci95), "written": [str(out)]}


def run_report(measurement_csvs: Sequence, out: Path | None = None,
               level: float = 0.95) -> AccuracyReport:
    """Pool measured pairs from several files into one report."""
    pooled: list[PointPair] = []
    for path in measurement_csvs:
        entries = read_measurement_csv(path)
        for e in entries:
            if isinstance(e, PairRef):
                raise InputError(
                    f"{path}: contains unmeasured point references; run measure first"
                )
            pooled.append(e)
    report = build_report(pooled, level)
    if out is not None:
        out = Path(out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(report_to_json(report), encoding="utf-8")
    return report
