"""Point-pair accuracy harness: per-pair errors, t-intervals, state measuring.

The three measurement fixtures (lamp cover, bottle holder, shoe supporter)
carry reported error percentages next to the raw distances.  The interval
oracle here is deliberately independent of the implementation: plain
``statistics`` arithmetic plus two-sided 97.5% Student-t quantiles frozen
from standard tables.
"""

import dataclasses
import json
import math
import statistics
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from morphgrid.accuracy import (
    AccuracyReport,
    PairRef,
    PointPair,
    build_report,
    confidence_interval,
    format_report_table,
    measure_state,
    pair_error,
    read_measurement_csv,
    report_to_dict,
    report_to_json,
    segments_from_doc,
    segments_from_mesh,
)
from morphgrid.errors import (
    EmptyFile,
    MalformedRow,
    SchemaMismatch,
    TooFewPairs,
    UnresolvedReference,
)
from morphgrid.grid import MeshConfig, mesh_design, mesh_to_dict
from morphgrid.sim.solver import DeformedState

from conftest import single_unit_design

PAIR_SETS = ("lamp_cover", "bottle_holder", "shoe_supporter")

# Two-sided 95% Student-t critical values (97.5% quantile), standard tables.
T_CRIT = {7: 2.364624, 8: 2.306004, 24: 2.063899}

# Published mean-accuracy intervals for the three measured prints and the
# pooled batch; bounds are quoted to three decimals.
PUBLISHED_CI = {
    "lamp_cover": (0.968, 0.998),
    "bottle_holder": (0.962, 0.986),
    "shoe_supporter": (0.969, 0.988),
    "pooled": (0.972, 0.985),
}

# Same intervals recomputed once with the oracle below and frozen to 6 dp.
FROZEN_CI = {
    "lamp_cover": (0.967793, 0.998007),
    "bottle_holder": (0.962283, 0.985667),
    "shoe_supporter": (0.968721, 0.987679),
    "pooled": (0.972180, 0.984900),
}


def _oracle_interval(accuracies):
    """Independent t-interval: statistics module + frozen table quantiles."""
    n = len(accuracies)
    mean = statistics.fmean(accuracies)
    half = T_CRIT[n - 1] * statistics.stdev(accuracies) / math.sqrt(n)
    return (mean - half, mean + half)


def _load_pairs(fixdir, name):
    pairs = read_measurement_csv(fixdir / "pairs" / f"{name}.csv")
    assert all(isinstance(p, PointPair) for p in pairs)
    return pairs


# --- per-pair error -----------------------------------------------------------------


def test_pair_error_worked_examples():
    # 76.54 mm measured vs 72.42 mm simulated -> 5.38% when rounded to 2 dp.
    err = pair_error(PointPair("a-a'", 76.54, 72.42))
    assert err == pytest.approx(100.0 * 4.12 / 76.54, rel=1e-12)
    assert round(err, 2) == 5.38
    assert round(pair_error(PointPair("i-i'", 89.74, 92.25)), 2) == 2.80
    assert pair_error(PointPair("same", 50.0, 50.0)) == 0.0


def test_pair_error_is_symmetric_in_sign_of_deviation():
    assert pair_error(PointPair("u", 100.0, 97.0)) == pytest.approx(
        pair_error(PointPair("o", 100.0, 103.0)), rel=1e-12
    )


@settings(max_examples=200, deadline=None)
@given(
    experiment=st.floats(min_value=1e-3, max_value=1e4),
    ratio=st.floats(min_value=0.2, max_value=1.8),
    scale=st.floats(min_value=1e-3, max_value=1e3),
)
def test_pair_error_scale_invariant(experiment, ratio, scale):
    base = pair_error(PointPair("p", experiment, experiment * ratio))
    scaled = pair_error(PointPair("p", experiment * scale, experiment * ratio * scale))
    assert scaled == pytest.approx(base, rel=1e-9, abs=1e-9)
    assert 0.0 <= base <= 100.0 * abs(1.0 - ratio) + 1e-9


def test_pair_rejects_nonpositive_distances():
    with pytest.raises(ValueError, match="must be positive"):
        PointPair("bad", 0.0, 10.0)
    with pytest.raises(ValueError, match="must be positive"):
        PointPair("bad", 10.0, -1.0)


# --- published confidence intervals -------------------------------------------------


def test_intervals_match_published_values(fixdir):
    t0 = time.perf_counter()
    reports = {}
    pooled_pairs = []
    for name in PAIR_SETS:
        pairs = _load_pairs(fixdir, name)
        pooled_pairs += pairs
        reports[name] = build_report(pairs)
    reports["pooled"] = build_report(pooled_pairs)
    elapsed = time.perf_counter() - t0

    assert reports["pooled"].n == 25
    for name, report in reports.items():
        low, high = report.ci95
        pub_low, pub_high = PUBLISHED_CI[name]
        assert abs(low - pub_low) <= 0.002, name
        assert abs(high - pub_high) <= 0.002, name
        frozen_low, frozen_high = FROZEN_CI[name]
        assert low == pytest.approx(frozen_low, abs=1e-6), name
        assert high == pytest.approx(frozen_high, abs=1e-6), name
    assert elapsed < 1.0


def test_intervals_match_independent_oracle(fixdir):
    pooled = []
    for name in PAIR_SETS:
        pairs = _load_pairs(fixdir, name)
        accuracies = [1.0 - p.reported_error_percent / 100.0 for p in pairs]
        pooled += accuracies
        low, high = confidence_interval(accuracies)
        olow, ohigh = _oracle_interval(accuracies)
        assert low == pytest.approx(olow, abs=5e-6)
        assert high == pytest.approx(ohigh, abs=5e-6)
    low, high = confidence_interval(pooled)
    olow, ohigh = _oracle_interval(pooled)
    assert low == pytest.approx(olow, abs=5e-6)
    assert high == pytest.approx(ohigh, abs=5e-6)


def test_interval_widens_with_level(fixdir):
    pairs = _load_pairs(fixdir, "lamp_cover")
    accuracies = [1.0 - p.reported_error_percent / 100.0 for p in pairs]
    low95, high95 = confidence_interval(accuracies, level=0.95)
    low99, high99 = confidence_interval(accuracies, level=0.99)
    assert low99 < low95 < high95 < high99


def test_zero_spread_gives_degenerate_interval():
    low, high = confidence_interval([0.5, 0.5, 0.5])
    assert low == high == 0.5  # exactly representable, zero sample spread
    low, high = confidence_interval([0.97, 0.97, 0.97])
    assert high - low <= 1e-12
    report = build_report([PointPair(f"p{i}", 100.0, 98.0) for i in range(3)])
    low, high = report.ci95
    assert high - low <= 1e-12
    assert low == pytest.approx(report.mean_accuracy, abs=1e-12)


def test_too_few_pairs_raises():
    with pytest.raises(TooFewPairs):
        confidence_interval([0.98])
    with pytest.raises(TooFewPairs):
        build_report([PointPair("only", 10.0, 9.0)])


def test_report_invariant_interval_straddles_mean():
    results = build_report(
        [PointPair("a", 10.0, 9.0), PointPair("b", 10.0, 9.5)]
    ).pairs
    with pytest.raises(ValueError, match="straddle"):
        AccuracyReport(pairs=results, mean_accuracy=0.5, ci95=(0.9, 1.0), n=2)


# --- reported-vs-recomputed errors --------------------------------------------------


def test_recomputed_errors_agree_except_known_row(fixdir):
    for name in PAIR_SETS:
        report = build_report(_load_pairs(fixdir, name))
        for result in report.pairs:
            if name == "bottle_holder" and result.label == "e-g":
                continue
            assert abs(result.error_percent - result.computed_error_percent) <= 0.01, (
                name,
                result.label,
            )
            assert not result.discrepant


def test_known_discrepant_row_is_flagged_not_corrected(fixdir):
    report = build_report(_load_pairs(fixdir, "bottle_holder"))
    flagged = report.flagged
    assert len(flagged) == 1
    row = flagged[0]
    assert row.label == "e-g"
    assert row.experiment_mm == pytest.approx(161.45)
    assert row.simulation_mm == pytest.approx(160.31)
    # The recorded value stays in the statistics; the recomputed one rides along.
    assert row.error_percent == pytest.approx(0.43, abs=1e-12)
    assert row.computed_error_percent == pytest.approx(0.706101, abs=1e-4)
    assert row.discrepant
    assert row.accuracy == pytest.approx(1.0 - 0.43 / 100.0, abs=1e-12)


def test_statistics_use_reported_errors_when_present(fixdir):
    pairs = _load_pairs(fixdir, "bottle_holder")
    report = build_report(pairs)
    from_reported = statistics.fmean(
        1.0 - p.reported_error_percent / 100.0 for p in pairs
    )
    from_recomputed = statistics.fmean(1.0 - pair_error(p) / 100.0 for p in pairs)
    assert report.mean_accuracy == pytest.approx(from_reported, abs=1e-12)
    assert abs(report.mean_accuracy - from_recomputed) > 1e-4


def test_missing_reported_column_recomputes(fixdir):
    pairs = [
        PointPair("a", 76.54, 72.42),
        PointPair("b", 78.16, 78.50),
        PointPair("c", 64.95, 66.01),
    ]
    report = build_report(pairs)
    for result in report.pairs:
        assert result.error_percent == result.computed_error_percent
        assert not result.discrepant
    assert not report.flagged


def test_table_marks_flagged_rows(fixdir):
    bottle = format_report_table(build_report(_load_pairs(fixdir, "bottle_holder")))
    flagged_line = next(line for line in bottle.splitlines() if line.startswith("e-g"))
    assert flagged_line.rstrip().endswith("*")
    assert "reported error differs from the recomputed value" in bottle
    assert "95% CI = (0.962, 0.986)" in bottle

    lamp = format_report_table(build_report(_load_pairs(fixdir, "lamp_cover")))
    assert "*" not in lamp
    assert "n = 9" in lamp


# --- serialization ------------------------------------------------------------------


def test_report_json_round_trip_and_determinism(fixdir):
    report = build_report(_load_pairs(fixdir, "bottle_holder"))
    text = report_to_json(report)
    assert text == report_to_json(report)
    doc = json.loads(text)
    assert doc["kind"] == "accuracy_report"
    assert doc["format_version"] == 1
    assert doc["n"] == 8
    assert doc["ci95"] == [pytest.approx(v) for v in report.ci95]
    by_label = {row["label"]: row for row in doc["pairs"]}
    assert by_label["e-g"]["discrepant"] is True
    assert sum(row["discrepant"] for row in doc["pairs"]) == 1
    assert report_to_dict(report)["mean_accuracy"] == report.mean_accuracy


# --- measurement CSV parsing --------------------------------------------------------


def test_csv_pair_layout_without_reported_column(tmp_path):
    path = tmp_path / "plain.csv"
    path.write_text(
        "label,experiment_mm,simulation_mm\n"
        "a,76.54,72.42\n"
        "\n"
        "b,78.16,78.50\n"
    )
    pairs = read_measurement_csv(path)
    assert [p.label for p in pairs] == ["a", "b"]
    assert all(p.reported_error_percent is None for p in pairs)


def test_csv_reference_layout(tmp_path):
    path = tmp_path / "refs.csv"
    path.write_text(
        "label,experiment_mm,point_a,point_b\n"
        "tip,99.5,root,tip\n"
        "mid,49.0,root,u1@0.5\n"
    )
    refs = read_measurement_csv(path)
    assert all(isinstance(r, PairRef) for r in refs)
    assert refs[1].point_b == "u1@0.5"
    assert refs[0].experiment_mm == 99.5


def test_csv_empty_file(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("")
    with pytest.raises(EmptyFile):
        read_measurement_csv(path)


def test_csv_malformed_row_carries_index(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text(
        "label,experiment_mm,simulation_mm\n"
        "ok,10.0,9.0\n"
        "broken,ten,9.0\n"
    )
    with pytest.raises(MalformedRow) as excinfo:
        read_measurement_csv(path)
    assert excinfo.value.row_index == 3


def test_csv_unknown_header(tmp_path):
    path = tmp_path / "odd.csv"
    path.write_text("x,y\n1,2\n")
    with pytest.raises(SchemaMismatch):
        read_measurement_csv(path)


def test_fixture_files_parse_as_pairs(fixdir):
    for name in PAIR_SETS:
        pairs = _load_pairs(fixdir, name)
        assert len(pairs) >= 8
        assert all(p.reported_error_percent is not None for p in pairs)


# --- measuring deformed states ------------------------------------------------------


def _identity_state(mesh):
    n = len(mesh.node_ids)
    return DeformedState(
        node_ids=mesh.node_ids,
        positions=mesh.positions.copy(),
        rotations=np.tile(np.eye(3), (n, 1, 1)),
        reference_positions=mesh.positions.copy(),
        load_factor=1.0,
        newton_iterations=(0,),
        energy=0.0,
    )


@pytest.fixture(scope="module")
def meshed_unit():
    design = single_unit_design(ratio=0.3)
    return mesh_design(design, MeshConfig(segments_per_member=8))


def test_measure_state_node_references(meshed_unit):
    state = _identity_state(meshed_unit)
    refs = [PairRef("span", 100.0, "root", "tip")]
    (pair,) = measure_state(state, refs)
    assert pair.label == "span"
    assert pair.experiment_mm == 100.0
    assert pair.simulation_mm == pytest.approx(100.0, abs=1e-12)


def test_measure_state_parametric_points(meshed_unit):
    # ratio 0.3 over 8 segments meshes non-uniformly (2 x 15 mm + 6 x 35/3 mm),
    # so fractional references exercise the arc-length walk across segments.
    state = _identity_state(meshed_unit)
    segments = segments_from_mesh(meshed_unit)
    lengths = sorted({round(s.length, 9) for s in segments if s.member_id == "u1"})
    assert len(lengths) == 2  # genuinely non-uniform chain

    refs = [
        PairRef("ends", 1.0, "u1@0.0", "u1@1.0"),
        PairRef("half", 1.0, "root", "u1@0.5"),
        PairRef("deep", 1.0, "root", "u1@0.37"),
    ]
    pairs = measure_state(state, refs, segments)
    assert pairs[0].simulation_mm == pytest.approx(100.0, abs=1e-9)
    assert pairs[1].simulation_mm == pytest.approx(50.0, abs=1e-9)
    assert pairs[2].simulation_mm == pytest.approx(37.0, abs=1e-9)


def test_measure_state_sees_deformation(meshed_unit):
    state = _identity_state(meshed_unit)
    lifted = dataclasses.replace(
        state, positions=state.positions + np.array([0.0, 0.0, 5.0])
    )
    (rigid,) = measure_state(lifted, [PairRef("span", 100.0, "root", "tip")])
    assert rigid.simulation_mm == pytest.approx(100.0, abs=1e-12)

    stretched = dataclasses.replace(state, positions=state.positions * 2.0)
    (scaled,) = measure_state(stretched, [PairRef("span", 100.0, "root", "tip")])
    assert scaled.simulation_mm == pytest.approx(200.0, abs=1e-12)


def test_segments_from_doc_matches_mesh(meshed_unit):
    direct = segments_from_mesh(meshed_unit)
    via_doc = segments_from_doc(mesh_to_dict(meshed_unit))
    assert via_doc == direct


def test_measure_state_unresolved_references(meshed_unit):
    state = _identity_state(meshed_unit)
    segments = segments_from_mesh(meshed_unit)

    with pytest.raises(UnresolvedReference, match="matches no node or member"):
        measure_state(state, [PairRef("x", 1.0, "root", "ghost")], segments)
    with pytest.raises(UnresolvedReference, match="unknown member"):
        measure_state(state, [PairRef("x", 1.0, "root", "u9@0.5")], segments)
    with pytest.raises(UnresolvedReference, match="bad fraction"):
        measure_state(state, [PairRef("x", 1.0, "root", "u1@mid")], segments)
    with pytest.raises(UnresolvedReference, match="out of"):
        measure_state(state, [PairRef("x", 1.0, "root", "u1@1.5")], segments)
    with pytest.raises(UnresolvedReference, match="no mesh connectivity"):
        measure_state(state, [PairRef("x", 1.0, "root", "u1@0.5")])
