"""Workbench tests: CLI subcommands with exit codes, HTTP API with job store.

CLI commands run in-process through ``cli.main`` so the solver's compiled
kernels stay warm; one subprocess smoke test checks the installed console
script.  The API is exercised through FastAPI's TestClient against a project
directory seeded from the checked-in fixtures.
"""

import json
import shutil
import subprocess
import time

import pytest
from fastapi.testclient import TestClient

from morphgrid.materials import PLA_ALPHA_T, load_material_card
from morphgrid.workbench.api import create_app
from morphgrid.workbench.cli import main
from morphgrid.workbench.project import Project, validate_document
from morphgrid.errors import InvalidDocument

OBSERVED_SIGMA0 = 0.132095
EXPECTED_PLASTICITY = (
    (0.079267, 0.004998),
    (0.132095, 0.015219),
    (0.170461, 0.03359),
    (0.203041, 0.055328),
)

RESULT_FILES = ("stage_a.state.json", "stage_b.state.json", "stage_a.obj",
                "stage_b.obj", "mesh.json", "summary.json")


def _design(fixdir, stem):
    return str(fixdir / "designs" / f"{stem}.grid.json")


@pytest.fixture(scope="module")
def single_unit_run(tmp_path_factory, fixdir):
    """One CLI simulation of the single-unit fixture, shared by the module."""
    out = tmp_path_factory.mktemp("single_unit_run")
    assert main(["simulate", "--design", _design(fixdir, "single_unit"),
                 "--out", str(out)]) == 0
    return out


# --- CLI: happy paths ---------------------------------------------------------------


def test_cli_simulate_zero_release_is_pure_dilation(tmp_path, fixdir):
    out = tmp_path / "zero"
    assert main(["simulate", "--design", _design(fixdir, "zero_release"),
                 "--out", str(out)]) == 0
    doc = json.loads((out / "stage_b.state.json").read_text())
    factor = 1.0 + PLA_ALPHA_T * 60.0
    for node in doc["nodes"]:
        for p, r in zip(node["position_mm"], node["reference_position_mm"]):
            assert abs(p - factor * r) <= 1e-9
    # triggering without residual stress does not bend: stage A already sits
    # at the dilated layout and stage B has nothing left to relax
    summary = json.loads((out / "summary.json").read_text())
    assert summary["newton_iterations"]["b"] == [0]


def test_cli_simulate_writes_all_artifacts(single_unit_run):
    for name in RESULT_FILES:
        assert (single_unit_run / name).exists(), name
    doc = json.loads((single_unit_run / "stage_b.state.json").read_text())
    assert doc["kind"] == "deformed_state"
    mesh = json.loads((single_unit_run / "mesh.json").read_text())
    assert mesh["kind"] == "beam_mesh"


def test_cli_simulate_deterministic_byte_for_byte(tmp_path, fixdir, single_unit_run):
    again = tmp_path / "again"
    assert main(["simulate", "--design", _design(fixdir, "single_unit"),
                 "--out", str(again)]) == 0
    for name in RESULT_FILES:
        assert (again / name).read_bytes() == (single_unit_run / name).read_bytes(), name


def test_cli_calibrate_reproduces_fixture_card(tmp_path, fixdir, capsys):
    out = tmp_path / "pla.matcard.json"
    argv = [
        "calibrate", "--name", "pla",
        "--loading", str(fixdir / "dma" / "pla_loading_80c.csv"),
        "--sweep", str(fixdir / "dma" / "pla_sweep_80c.csv"),
        "--alpha-t", "0.000917", "--poisson", "0.419",
        "--out", str(out),
    ]
    for stem in ("0p203", "0p170", "0p132", "0p079"):
        argv += ["--unloading", str(fixdir / "dma" / f"pla_unloading_{stem}.csv")]
    assert main(argv) == 0

    card = load_material_card(out)
    assert card.viscoelastic_enabled
    rows = card.plasticity.rows
    assert len(rows) == 4
    for (sigma0, plastic), (want_s, want_p) in zip(rows, EXPECTED_PLASTICITY):
        assert sigma0 == pytest.approx(want_s, abs=1e-6)
        assert plastic == pytest.approx(want_p, abs=1e-6)

    printed = capsys.readouterr().out
    assert printed.count("plasticity:") == 4
    assert "viscoelastic: True" in printed
    # drift check: the CLI output is byte-identical to the checked-in card
    assert out.read_bytes() == (fixdir / "materials" / "pla.matcard.json").read_bytes()


def test_cli_shoot_recovers_sigma0(tmp_path, fixdir, capsys):
    out = tmp_path / "result.shoot.json"
    assert main([
        "shoot",
        "--card", str(fixdir / "materials" / "pla.matcard.json"),
        "--constraint-card", str(fixdir / "materials" / "cfpla.matcard.json"),
        "--observations", str(fixdir / "observations" / "unit_batch_80c.obs.csv"),
        "--tol-mm", "0.01",
        "--out", str(out),
    ]) == 0
    doc = json.loads(out.read_text())
    assert doc["kind"] == "shoot_result"
    assert doc["converged"] is True
    assert doc["sigma0_mpa"] == pytest.approx(OBSERVED_SIGMA0, abs=1e-3)
    assert "converged" in capsys.readouterr().out


def test_cli_report_prints_pooled_interval(fixdir, capsys):
    assert main(["report",
                 str(fixdir / "pairs" / "lamp_cover.csv"),
                 str(fixdir / "pairs" / "bottle_holder.csv"),
                 str(fixdir / "pairs" / "shoe_supporter.csv")]) == 0
    printed = capsys.readouterr().out
    assert "n = 25" in printed
    assert "95% CI = (0.972, 0.985)" in printed


def test_cli_report_writes_deterministic_json(tmp_path, fixdir):
    paths = [str(fixdir / "pairs" / f"{n}.csv")
             for n in ("lamp_cover", "bottle_holder", "shoe_supporter")]
    out1, out2 = tmp_path / "r1.json", tmp_path / "r2.json"
    assert main(["report", *paths, "--out", str(out1)]) == 0
    assert main(["report", *paths, "--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    doc = json.loads(out1.read_text())
    assert doc["n"] == 25
    assert doc["ci95"][0] == pytest.approx(0.972180, abs=1e-6)
    assert doc["ci95"][1] == pytest.approx(0.984900, abs=1e-6)


def test_cli_measure_on_simulated_state(tmp_path, single_unit_run, capsys):
    refs = tmp_path / "refs.csv"
    refs.write_text(
        "label,experiment_mm,point_a,point_b\n"
        "span,99.5,root,tip\n"
        "half,49.8,root,u1@0.5\n"
    )
    out = tmp_path / "report.json"
    assert main(["measure",
                 "--state", str(single_unit_run / "stage_b.state.json"),
                 "--measurements", str(refs),
                 "--mesh", str(single_unit_run / "mesh.json"),
                 "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["n"] == 2
    assert {p["label"] for p in doc["pairs"]} == {"span", "half"}
    assert all(p["simulation_mm"] > 0 for p in doc["pairs"])
    assert "n = 2" in capsys.readouterr().out


def test_cli_ingest_canonicalizes_curve(tmp_path, fixdir):
    out = tmp_path / "loading.csv"
    assert main(["ingest", str(fixdir / "dma" / "pla_loading_80c.csv"),
                 "--out", str(out)]) == 0
    header = out.read_text().splitlines()[0]
    assert header == "strain,stress_mpa"
    # idempotent: re-ingesting the canonical output reproduces it
    out2 = tmp_path / "loading2.csv"
    assert main(["ingest", str(out), "--out", str(out2)]) == 0
    assert out2.read_bytes() == out.read_bytes()


def test_console_script_entry_point(fixdir):
    proc = subprocess.run(
        ["morphgrid", "report", str(fixdir / "pairs" / "lamp_cover.csv")],
        capture_output=True, text=True, timeout=120,
    )
    assert proc.returncode == 0, proc.stderr
    assert "n = 9" in proc.stdout


# --- CLI: exit codes ----------------------------------------------------------------


def test_cli_exit_1_on_missing_file(tmp_path):
    assert main(["simulate", "--design", str(tmp_path / "nope.grid.json"),
                 "--out", str(tmp_path / "out")]) == 1


def test_cli_exit_1_on_invalid_design(tmp_path, capsys):
    bad = tmp_path / "bad.grid.json"
    bad.write_text("{\"kind\": \"grid_design\"")  # truncated JSON
    assert main(["simulate", "--design", str(bad), "--out", str(tmp_path / "o")]) == 1
    assert "error:" in capsys.readouterr().err


def test_cli_exit_1_on_schema_mismatch(tmp_path, fixdir):
    odd = tmp_path / "odd.csv"
    odd.write_text("a,b\n1,2\n")
    assert main(["ingest", str(odd), "--out", str(tmp_path / "out.csv")]) == 1


def test_cli_exit_1_on_split_cycles_of_sweep(tmp_path, fixdir):
    assert main(["ingest", str(fixdir / "dma" / "pla_sweep_80c.csv"),
                 "--out", str(tmp_path / "d"), "--split-cycles"]) == 1


def test_cli_exit_1_on_member_refs_without_mesh(tmp_path, single_unit_run):
    refs = tmp_path / "refs.csv"
    refs.write_text("label,experiment_mm,point_a,point_b\nhalf,50,root,u1@0.5\n")
    assert main(["measure",
                 "--state", str(single_unit_run / "stage_b.state.json"),
                 "--measurements", str(refs),
                 "--out", str(tmp_path / "r.json")]) == 1


def test_cli_exit_1_on_report_of_unmeasured_refs(tmp_path):
    refs = tmp_path / "refs.csv"
    refs.write_text("label,experiment_mm,point_a,point_b\nspan,99,root,tip\n")
    assert main(["report", str(refs)]) == 1


def test_cli_exit_2_on_unbracketable_shoot(tmp_path, fixdir):
    obs = tmp_path / "impossible.obs.csv"
    obs.write_text("actuator_ratio,distance_mm,temp_c\n1.0,50.0,80.0\n")
    assert main([
        "shoot",
        "--card", str(fixdir / "materials" / "pla.matcard.json"),
        "--constraint-card", str(fixdir / "materials" / "cfpla.matcard.json"),
        "--observations", str(obs),
        "--out", str(tmp_path / "r.json"),
    ]) == 2


def test_cli_exit_2_on_nonconvergent_simulate(tmp_path, fixdir, capsys):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"solver": {
        "load_steps": 1, "newton_tol": 1e-12, "max_newton_iter": 2,
        "line_search": False,
    }}))
    assert main(["simulate", "--design", _design(fixdir, "single_unit"),
                 "--out", str(tmp_path / "out"), "--config", str(config)]) == 2
    assert "error:" in capsys.readouterr().err


# --- project store ------------------------------------------------------------------


def test_project_validate_document_rejects_dangling_material(fixdir):
    doc = json.loads((fixdir / "designs" / "single_unit.grid.json").read_text())
    del doc["materials"]["cfpla"]
    with pytest.raises(InvalidDocument, match="missing from the materials map"):
        validate_document("designs", json.dumps(doc).encode())


def test_project_roundtrip_and_manifest(tmp_path, fixdir):
    project = Project.open(tmp_path / "proj")
    data = (fixdir / "materials" / "cfpla.matcard.json").read_bytes()
    etag = project.put_document("materials", "cfpla", data)
    assert project.list_documents("materials") == ["cfpla"]
    got, got_etag = project.get_document("materials", "cfpla")
    assert got == data and got_etag == etag
    assert project.validate_manifest() == []
    # reopening sees the same state
    again = Project.open(tmp_path / "proj", create=False)
    assert again.list_documents("materials") == ["cfpla"]


# --- HTTP API -----------------------------------------------------------------------


def _put(client, category, name, data: bytes, **kwargs):
    return client.put(f"/{category}/{name}", content=data, **kwargs)


def _post_job(client, kind, inputs, options=None):
    body = {"kind": kind, "inputs": inputs}
    if options:
        body["options"] = options
    return client.post("/jobs", json=body)


def _wait(client, job_id, timeout=180.0):
    deadline = time.time() + timeout
    while time.time() < deadline:
        doc = client.get(f"/jobs/{job_id}").json()
        if doc["job"]["status"] in ("done", "failed"):
            return doc
        time.sleep(0.05)
    raise AssertionError(f"job {job_id} did not finish")


@pytest.fixture(scope="module")
def client(tmp_path_factory, fixdir):
    root = tmp_path_factory.mktemp("project")
    app = create_app(root, max_workers=2)
    with TestClient(app) as c:
        for name in ("pla", "cfpla"):
            r = _put(c, "materials", name,
                     (fixdir / "materials" / f"{name}.matcard.json").read_bytes())
            assert r.status_code == 200, r.text
        for stem in ("single_unit", "zero_release"):
            r = _put(c, "designs", stem,
                     (fixdir / "designs" / f"{stem}.grid.json").read_bytes())
            assert r.status_code == 200, r.text
        r = _put(c, "observations", "unit_batch",
                 (fixdir / "observations" / "unit_batch_80c.obs.csv").read_bytes())
        assert r.status_code == 200, r.text
        for name in ("lamp_cover", "bottle_holder", "shoe_supporter"):
            r = _put(c, "measurements", name,
                     (fixdir / "pairs" / f"{name}.csv").read_bytes())
            assert r.status_code == 200, r.text
        yield c


@pytest.fixture(scope="module")
def sim_job(client):
    """A finished simulate job for the single-unit design."""
    r = _post_job(client, "simulate", {"design": "single_unit"})
    assert r.status_code == 200, r.text
    record = r.json()
    doc = _wait(client, record["id"])
    assert doc["job"]["status"] == "done", doc["job"]["log"]
    return doc


def test_api_document_listing_and_content(client, fixdir):
    assert client.get("/materials").json()["names"] == ["cfpla", "pla"]
    assert "single_unit" in client.get("/designs").json()["names"]
    r = client.get("/materials/pla")
    assert r.status_code == 200
    assert r.content == (fixdir / "materials" / "pla.matcard.json").read_bytes()
    assert len(r.headers["ETag"]) == 64
    assert client.get("/measurements/lamp_cover").headers["content-type"].startswith("text/csv")


def test_api_404_on_unknown_documents(client):
    assert client.get("/materials/unobtainium").status_code == 404
    assert client.get("/designs/unknown").status_code == 404
    assert client.get("/jobs/ffffffffffff").status_code == 404


def test_api_put_validates_documents(client, fixdir):
    assert _put(client, "materials", "junk", b"not json").status_code == 422
    doc = json.loads((fixdir / "designs" / "single_unit.grid.json").read_text())
    del doc["materials"]["cfpla"]
    r = _put(client, "designs", "dangling", json.dumps(doc).encode())
    assert r.status_code == 422
    assert "missing from the materials map" in r.json()["detail"]
    wrong_kind = {"kind": "mystery", "format_version": 1}
    assert _put(client, "materials", "odd", json.dumps(wrong_kind).encode()).status_code == 422


def test_api_optimistic_concurrency(client, fixdir):
    data = (fixdir / "designs" / "zero_release.grid.json").read_bytes()
    first = _put(client, "designs", "concurrent", data)
    assert first.status_code == 200
    etag = first.json()["etag"]
    assert client.get("/designs/concurrent").headers["ETag"] == etag

    stale = _put(client, "designs", "concurrent", data,
                 headers={"If-Match": "0" * 64})
    assert stale.status_code == 409

    fresh = _put(client, "designs", "concurrent", data, headers={"If-Match": etag})
    assert fresh.status_code == 200
    assert fresh.json()["etag"] == etag  # same bytes, same content hash


def test_api_job_body_validation(client):
    assert client.post("/jobs", content=b"{oops").status_code == 422
    assert _post_job(client, "transmogrify", {}).status_code == 422
    assert _post_job(client, "simulate", {}).status_code == 422
    assert _post_job(client, "simulate", {"design": "unknown"}).status_code == 404
    assert _post_job(client, "calibrate", {"loading": "x"}).status_code == 422  # no options
    r = client.post("/jobs", json=["not", "an", "object"])
    assert r.status_code == 422


def test_api_simulate_job_matches_cli_bytes(client, sim_job, single_unit_run):
    job = sim_job["job"]
    assert job["kind"] == "simulate"
    states = job["outputs"]["states"]
    assert set(states) == {"a", "b"}

    state_id = f"{sim_job['id']}-b"
    r = client.get(f"/states/{state_id}")
    assert r.status_code == 200
    assert r.content == (single_unit_run / "stage_b.state.json").read_bytes()
    r = client.get(f"/states/{sim_job['id']}-a")
    assert r.content == (single_unit_run / "stage_a.state.json").read_bytes()


def test_api_state_mesh_overlays_deformed_positions(client, sim_job):
    state_id = f"{sim_job['id']}-b"
    state = json.loads(client.get(f"/states/{state_id}").content)
    mesh = client.get(f"/states/{state_id}/mesh").json()
    assert mesh["kind"] == "deformed_mesh"
    assert mesh["state_id"] == state_id
    deformed = {n["id"]: n["position_mm"] for n in state["nodes"]}
    assert {n["id"] for n in mesh["nodes"]} == set(deformed)
    for node in mesh["nodes"]:
        assert node["position_mm"] == deformed[node["id"]]
    assert mesh["elements"]  # polyline connectivity for rendering


def test_api_states_404s(client, sim_job):
    assert client.get("/states/nonexistent-b").status_code == 404
    assert client.get(f"/states/{sim_job['id']}-z").status_code == 404
    assert client.get(f"/states/{sim_job['id']}").status_code == 404  # no stage suffix


def test_api_identical_posts_are_cached(client, sim_job):
    r = _post_job(client, "simulate", {"design": "single_unit"})
    assert r.status_code == 200
    again = r.json()
    assert again["id"] == sim_job["id"]
    assert again["job"]["status"] == "done"  # served from cache, not re-queued


def test_api_changed_document_misses_cache(client, fixdir):
    doc = json.loads((fixdir / "designs" / "zero_release.grid.json").read_text())
    assert _put(client, "designs", "variant", json.dumps(doc).encode()).status_code == 200
    first = _post_job(client, "simulate", {"design": "variant"}).json()
    _wait(client, first["id"])

    doc["trigger_temperature_c"] = 70.0
    assert _put(client, "designs", "variant", json.dumps(doc).encode()).status_code == 200
    second = _post_job(client, "simulate", {"design": "variant"}).json()
    assert second["id"] != first["id"]
    done = _wait(client, second["id"])
    assert done["job"]["status"] == "done"


def test_api_shoot_job(client):
    r = _post_job(client, "shoot", {
        "card": "pla", "constraint_card": "cfpla", "observations": "unit_batch",
    })
    assert r.status_code == 200
    doc = _wait(client, r.json()["id"])
    assert doc["job"]["status"] == "done", doc["job"]["log"]
    outputs = doc["job"]["outputs"]
    assert outputs["converged"] is True
    assert abs(outputs["sigma0_mpa"] - OBSERVED_SIGMA0) <= 0.02


def test_api_measure_job_on_simulated_state(client, sim_job):
    r = _post_job(client, "measure", {
        "state": f"{sim_job['id']}-b", "measurements": "bottle_holder",
    })
    assert r.status_code == 200
    doc = _wait(client, r.json()["id"])
    assert doc["job"]["status"] == "done", doc["job"]["log"]
    summary = doc["job"]["outputs"]["summary"]
    assert summary["n"] == 8
    assert summary["ci95"][0] == pytest.approx(0.962283, abs=1e-6)
    assert summary["ci95"][1] == pytest.approx(0.985667, abs=1e-6)
    report_doc = doc["job"]["outputs"]["report_doc"]
    assert report_doc["kind"] == "accuracy_report"
    assert report_doc["n"] == 8 and len(report_doc["pairs"]) == 8
    assert report_doc["ci95"] == summary["ci95"]


def test_api_report_job_pools_measurements(client):
    r = _post_job(client, "report", {
        "measurements": ["lamp_cover", "bottle_holder", "shoe_supporter"],
    })
    assert r.status_code == 200
    doc = _wait(client, r.json()["id"])
    assert doc["job"]["status"] == "done", doc["job"]["log"]
    outputs = doc["job"]["outputs"]
    assert outputs["n"] == 25
    assert outputs["ci95"][0] == pytest.approx(0.972180, abs=1e-6)
    assert outputs["ci95"][1] == pytest.approx(0.984900, abs=1e-6)
    report_doc = outputs["report_doc"]
    assert report_doc["kind"] == "accuracy_report"
    assert len(report_doc["pairs"]) == 25
    assert sum(p["discrepant"] for p in report_doc["pairs"]) == 1
    assert _post_job(client, "report", {"measurements": ["ghost"]}).status_code == 404


def test_api_failed_job_surfaces_log_excerpt(client, fixdir):
    doc = json.loads((fixdir / "designs" / "zero_release.grid.json").read_text())
    doc["nodes"][1]["position_mm"] = [0.0, 0.0, 0.0]  # coincident with the root
    assert _put(client, "designs", "degenerate", json.dumps(doc).encode()).status_code == 200
    record = _post_job(client, "simulate", {"design": "degenerate"}).json()
    done = _wait(client, record["id"])
    assert done["job"]["status"] == "failed"
    assert "coincident" in done["job"]["log"]

    r = client.get(f"/states/{record['id']}-a")
    assert r.status_code == 500
    detail = r.json()["detail"]
    assert "failed" in detail["message"]
    assert "coincident" in detail["log"]


def test_api_responses_carry_format_version(client, sim_job):
    assert client.get("/materials").json()["format_version"] == 1
    assert sim_job["format_version"] == 1
    state = json.loads(client.get(f"/states/{sim_job['id']}-a").content)
    assert state["format_version"] == 1
