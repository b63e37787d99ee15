"""Point-pair verification: per-pair error, accuracy statistics, intervals.

Experiment and simulation are compared by measuring the distance between
the same two points in both; the per-pair error is the absolute relative
deviation and a pair's accuracy is one minus that error.  Batch accuracy is
summarized by a Student-t confidence interval on the mean per-pair accuracy.

Measurement files may carry a previously reported error percentage next to
the raw distances.  When present, the reported value enters the statistics
and the recomputed value is kept alongside; rows where the two disagree by
more than 0.01 percentage points are flagged, not silently corrected.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

from .errors import (
    EmptyFile,
    MalformedRow,
    SchemaMismatch,
    TooFewPairs,
    UnresolvedReference,
)

REPORT_FORMAT_VERSION = 1
DISCREPANCY_TOL_PP = 0.01  # percentage points

PAIR_HEADER = ("label", "experiment_mm", "simulation_mm")
PAIR_HEADER_REPORTED = PAIR_HEADER + ("reported_error_percent",)
REF_HEADER = ("label", "experiment_mm", "point_a", "point_b")


@dataclass(frozen=True)
class PointPair:
    """One measured distance pair."""

    label: str
    experiment_mm: float
    simulation_mm: float
    reported_error_percent: float | None = None

    def __post_init__(self):
        if self.experiment_mm <= 0 or self.simulation_mm <= 0:
            raise ValueError(f"pair {self.label!r}: distances must be positive")


@dataclass(frozen=True)
class PairRef:
    """A pair whose simulation distance is measured off a deformed state."""

    label: str
    experiment_mm: float
    point_a: str  # node id, or "member@fraction"
    point_b: str


@dataclass(frozen=True)
class MemberSegment:
    """Connectivity of one meshed segment, for parametric point references."""

    member_id: str
    segment_index: int
    node_i: str
    node_j: str
    length: float


def pair_error(pair: PointPair) -> float:
    """Percent deviation of simulation from experiment."""
    return 100.0 * abs(pair.experiment_mm - pair.simulation_mm) / pair.experiment_mm


@dataclass(frozen=True)
class PairResult:
    label: str
    experiment_mm: float
    simulation_mm: float
    error_percent: float           # value used in the statistics
    computed_error_percent: float  # recomputed from the distances
    accuracy: float

    @property
    def discrepant(self) -> bool:
        return abs(self.error_percent - self.computed_error_percent) > DISCREPANCY_TOL_PP


@dataclass(frozen=True)
class AccuracyReport:
    pairs: tuple[PairResult, ...]
    mean_accuracy: float
    ci95: tuple[float, float]
    n: int

    def __post_init__(self):
        low, high = self.ci95
        if not (low <= self.mean_accuracy + 1e-12 and self.mean_accuracy <= high + 1e-12):
            raise ValueError("confidence interval must straddle the mean")

    @property
    def flagged(self) -> tuple[PairResult, ...]:
        return tuple(p for p in self.pairs if p.discrepant)


def confidence_interval(accuracies: Sequence[float], level: float = 0.95,
                        ) -> tuple[float, float]:
    """Student-t interval on the mean: mean ± t_{n-1,(1+level)/2} * s / sqrt(n)."""
    n = len(accuracies)
    if n < 2:
        raise TooFewPairs(f"need at least 2 pairs for an interval, got {n}")
    arr = np.asarray(accuracies, dtype=float)
    mean = float(arr.mean())
    s = float(arr.std(ddof=1))
    t = float(stats.t.ppf(0.5 * (1.0 + level), n - 1))
    half = t * s / math.sqrt(n)
    return (mean - half, mean + half)


def build_report(pairs: Iterable[PointPair], level: float = 0.95) -> AccuracyReport:
    """Per-pair results plus the mean-accuracy t-interval."""
    results = []
    for p in pairs:
        computed = pair_error(p)
        used = p.reported_error_percent if p.reported_error_percent is not None else computed
        results.append(PairResult(
            label=p.label,
            experiment_mm=p.experiment_mm,
            simulation_mm=p.simulation_mm,
            error_percent=used,
            computed_error_percent=computed,
            accuracy=1.0 - used / 100.0,
        ))
    accuracies = [r.accuracy for r in results]
    ci = confidence_interval(accuracies, level)
    return AccuracyReport(
        pairs=tuple(results),
        mean_accuracy=float(np.mean(accuracies)),
        ci95=ci,
        n=len(results),
    )


# --- measuring states -------------------------------------------------------------


def segments_from_mesh(mesh) -> tuple[MemberSegment, ...]:
    """Connectivity view of a BeamMesh for parametric references."""
    return tuple(
        MemberSegment(
            member_id=el.member_id,
            segment_index=el.segment_index,
            node_i=mesh.node_ids[el.node_i],
            node_j=mesh.node_ids[el.node_j],
            length=el.length,
        )
        for el in mesh.elements
    )


def segments_from_doc(mesh_doc: dict) -> tuple[MemberSegment, ...]:
    """Connectivity from a serialized beam-mesh document."""
    return tuple(
        MemberSegment(
            member_id=str(el["member"]),
            segment_index=int(el["segment"]),
            node_i=str(el["node_i"]),
            node_j=str(el["node_j"]),
            length=float(el["length_mm"]),
        )
        for el in mesh_doc["elements"]
    )


def _resolve_point(ref: str, state, segments: Sequence[MemberSegment] | None) -> np.ndarray:
    if ref in state.node_ids:
        return state.positions[state.node_ids.index(ref)]
    if "@" in ref:
        member_id, _, frac_text = ref.partition("@")
        try:
            fraction = float(frac_text)
        except ValueError:
            raise UnresolvedReference(f"bad fraction in point reference {ref!r}") from None
        if not (0.0 <= fraction <= 1.0):
            raise UnresolvedReference(f"fraction out of [0, 1] in {ref!r}")
        if segments is None:
            raise UnresolvedReference(
                f"{ref!r} is a member reference but no mesh connectivity was given"
            )
        chain = sorted(
            (s for s in segments if s.member_id == member_id),
            key=lambda s: s.segment_index,
        )
        if not chain:
            raise UnresolvedReference(f"unknown member in point reference {ref!r}")
        total = sum(s.length for s in chain)
        target = fraction * total
        walked = 0.0
        for seg in chain:
            if target <= walked + seg.length or seg is chain[-1]:
                local = (target - walked) / seg.length
                local = min(max(local, 0.0), 1.0)
                pa = state.positions[state.node_ids.index(seg.node_i)]
                pb = state.positions[state.node_ids.index(seg.node_j)]
                return pa + local * (pb - pa)
            walked += seg.length
        raise UnresolvedReference(ref)  # pragma: no cover
    raise UnresolvedReference(f"point reference {ref!r} matches no node or member")


def measure_state(state, refs: Sequence[PairRef],
                  segments: Sequence[MemberSegment] | None = None) -> list[PointPair]:
    """Euclidean deformed-configuration distances for labeled reference pairs.

    References are node ids or ``member@fraction`` parametric points
    (fraction of the member's undeformed arc length, interpolated on the
    deformed segment chord).

    Raises
    ------
    UnresolvedReference
        A reference names no node or member of the state/mesh.
    """
    pairs = []
    for ref in refs:
        a = _resolve_point(ref.point_a, state, segments)
        b = _resolve_point(ref.point_b, state, segments)
        pairs.append(PointPair(
            label=ref.label,
            experiment_mm=ref.experiment_mm,
            simulation_mm=float(np.linalg.norm(b - a)),
        ))
    return pairs


# --- file formats ------------------------------------------------------------------


def read_measurement_csv(path) -> list[PointPair] | list[PairRef]:
    """Parse a measurement CSV.

    Two shapes are accepted: direct pairs
    (``label,experiment_mm,simulation_mm[,reported_error_percent]``) and
    point references (``label,experiment_mm,point_a,point_b``).
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if r and any(cell.strip() for cell in r)]
    if not rows:
        raise EmptyFile(f"{path}: no rows")
    header = tuple(cell.strip() for cell in rows[0])
    if header == PAIR_HEADER or header == PAIR_HEADER_REPORTED:
        with_reported = header == PAIR_HEADER_REPORTED
        out_pairs: list[PointPair] = []
        for i, row in enumerate(rows[1:]):
            try:
                reported = None
                if with_reported and row[3].strip():
                    reported = float(row[3])
                out_pairs.append(PointPair(
                    label=row[0].strip(),
                    experiment_mm=float(row[1]),
                    simulation_mm=float(row[2]),
                    reported_error_percent=reported,
                ))
            except (IndexError, ValueError) as exc:
                raise MalformedRow(i + 2, f"{path}: {exc}") from exc
        return out_pairs
    if header == REF_HEADER:
        out_refs: list[PairRef] = []
        for i, row in enumerate(rows[1:]):
            try:
                out_refs.append(PairRef(
                    label=row[0].strip(),
                    experiment_mm=float(row[1]),
                    point_a=row[2].strip(),
                    point_b=row[3].strip(),
                ))
            except (IndexError, ValueError) as exc:
                raise MalformedRow(i + 2, f"{path}: {exc}") from exc
        return out_refs
    raise SchemaMismatch(
        f"{path}: header {','.join(header)!r} is neither a pair nor a reference layout"
    )


def report_to_dict(report: AccuracyReport) -> dict:
    return {
        "format_version": REPORT_FORMAT_VERSION,
        "kind": "accuracy_report",
        "n": report.n,
        "mean_accuracy": report.mean_accuracy,
        "ci95": [report.ci95[0], report.ci95[1]],
        "pairs": [
            {
                "label": p.label,
                "experiment_mm": p.experiment_mm,
                "simulation_mm": p.simulation_mm,
                "error_percent": p.error_percent,
                "computed_error_percent": p.computed_error_percent,
                "accuracy": p.accuracy,
                "discrepant": p.discrepant,
            }
            for p in report.pairs
        ],
    }


def report_to_json(report: AccuracyReport) -> str:
    return json.dumps(report_to_dict(report), sort_keys=True, indent=2) + "\n"


def format_report_table(report: AccuracyReport) -> str:
    """Human-readable table with the interval on the last line."""
    lines = [f"{'pair':<10} {'exp (mm)':>10} {'sim (mm)':>10} {'err %':>8} {'acc':>8}"]
    for p in report.pairs:
        flag = " *" if p.discrepant else ""
        lines.append(
            f"{p.label:<10} {p.experiment_mm:>10.2f} {p.simulation_mm:>10.2f} "
            f"{p.error_percent:>8.2f} {p.accuracy:>8.4f}{flag}"
        )
    if report.flagged:
        lines.append("* reported error differs from the recomputed value by > "
                     f"{DISCREPANCY_TOL_PP} pp")
    low, high = report.ci95
    lines.append(f"n = {report.n}, mean accuracy = {report.mean_accuracy:.4f}, "
                 f"95% CI = ({low:.3f}, {high:.3f})")
    return "\n".join(lines) + "\n"
