"""Local JSON-over-HTTP service consumed by the design studio.

Documents live in a project directory; jobs run on a bounded worker pool and
are deduplicated by content hash, so re-posting an unchanged design returns
the already-computed result.  Every response body carries ``format_version``.
"""

from __future__ import annotations

import json
from contextlib import asynccontextmanager
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request, Response

from ..errors import InvalidDocument, MorphGridError
from .jobs import JOB_KINDS, JobRecord, JobStore, content_hash, hash_file
from .pipeline import (
    run_calibrate,
    run_ingest,
    run_measure,
    run_report,
    run_shoot,
    run_simulate,
)
from .project import CATEGORIES, Project, VersionConflict

API_FORMAT_VERSION = 1


def _resolve_in_project(project: Project, rel: str) -> Path:
    path = (project.root / rel).resolve()
    if not path.is_relative_to(project.root.resolve()):
        raise HTTPException(422, detail=f"path {rel!r} escapes the project directory")
    if not path.exists():
        raise HTTPException(404, detail=f"no such file in project: {rel}")
    return path


def _job_files(project: Project, store: "JobStore", kind: str, inputs: dict,
               ) -> dict[str, Path]:
    """Resolve every file a job reads, for hashing and for the runner."""
    files: dict[str, Path] = {}

    def document(category: str, key: str, required: bool = True) -> None:
        name = inputs.get(key)
        if name is None:
            if required:
                raise HTTPException(422, detail=f"{kind} job needs input {key!r}")
            return
        try:
            files[key] = project.document_path(category, str(name))
        except FileNotFoundError:
            raise HTTPException(404, detail=f"unknown {category} document {name!r}") from None

    if kind == "simulate":
        document("designs", "design")
        design_path = files["design"]
        doc = json.loads(design_path.read_text(encoding="utf-8"))
        for mat_name, rel in sorted(doc.get("materials", {}).items()):
            card = (design_path.parent / rel).resolve()
            if not card.exists():
                raise HTTPException(
                    422, detail=f"design references missing material file {rel!r}")
            files[f"material:{mat_name}"] = card
    elif kind == "shoot":
        document("materials", "card")
        document("materials", "constraint_card")
        document("observations", "observations")
    elif kind == "calibrate":
        for key in ("loading",):
            rel = inputs.get(key)
            if rel is None:
                raise HTTPException(422, detail=f"calibrate job needs input {key!r}")
            files[key] = _resolve_in_project(project, str(rel))
        unloading = inputs.get("unloading")
        if not isinstance(unloading, list) or not unloading:
            raise HTTPException(422, detail="calibrate job needs a list of unloading files")
        for k, rel in enumerate(unloading):
            files[f"unloading:{k}"] = _resolve_in_project(project, str(rel))
        if inputs.get("sweep"):
            files["sweep"] = _resolve_in_project(project, str(inputs["sweep"]))
    elif kind == "measure":
        state_id = inputs.get("state")
        if not state_id:
            raise HTTPException(422, detail="measure job needs input 'state'")
        state_path, mesh_path = _state_paths(project, store, str(state_id))
        files["state"] = state_path
        if mesh_path is not None:
            files["mesh"] = mesh_path
        document("measurements", "measurements")
    elif kind == "report":
        names = inputs.get("measurements")
        if not isinstance(names, list) or not names:
            raise HTTPException(422, detail="report job needs a list of measurements")
        for k, name in enumerate(names):
            try:
                files[f"measurements:{k}"] = project.document_path("measurements", str(name))
            except FileNotFoundError:
                raise HTTPException(
                    404, detail=f"unknown measurements document {name!r}") from None
    elif kind == "ingest":
        rel = inputs.get("input")
        if rel is None:
            raise HTTPException(422, detail="ingest job needs input 'input'")
        files["input"] = _resolve_in_project(project, str(rel))
    else:  # pragma: no cover - guarded by JOB_KINDS check in the handler
        raise HTTPException(422, detail=f"unknown job kind {kind!r}")
    return files


def _state_paths(project: Project, store: JobStore, state_id: str,
                 ) -> tuple[Path, Path | None]:
    job_id, _, stage = state_id.rpartition("-")
    if not job_id or stage not in ("a", "b"):
        raise HTTPException(404, detail=f"unknown state {state_id!r}")
    record = store.get(job_id)
    if record is None:
        raise HTTPException(404, detail=f"unknown job {job_id!r}")
    if record.status == "failed":
        raise HTTPException(500, detail={
            "message": f"job {job_id} failed",
            "log": record.log[-2000:],
        })
    if record.status != "done":
        raise HTTPException(404, detail=f"state {state_id!r} not available yet "
                                        f"(job {record.status})")
    rel = record.outputs.get("states", {}).get(stage)
    if rel is None:
        raise HTTPException(404, detail=f"job {job_id} produced no state {stage!r}")
    mesh_rel = record.outputs.get("mesh")
    mesh = project.root / mesh_rel if mesh_rel else None
    return project.root / rel, mesh


def create_app(project_root, max_workers: int = 2) -> FastAPI:
    project = Project.open(project_root)

    def run_job(record: JobRecord) -> dict:
        kind = record.kind
        params = record.params
        resolved = params["resolved"]
        options = params.get("options", {})
        out_dir = project.results_dir(record.id)
        rel = lambda p: str(Path(p).resolve().relative_to(project.root.resolve()))  # noqa: E731
        if kind == "simulate":
            design_path = project.root / resolved["design"]
            summary = run_simulate(design_path, out_dir)
            return {
                "states": {
                    "a": rel(out_dir / "stage_a.state.json"),
                    "b": rel(out_dir / "stage_b.state.json"),
                },
                "mesh": rel(out_dir / "mesh.json"),
                "summary": summary,
            }
        if kind == "shoot":
            out = out_dir / "result.shoot.json"
            doc = run_shoot(
                project.root / resolved["card"],
                project.root / resolved["constraint_card"],
                project.root / resolved["observations"],
                out,
                **{k: float(v) for k, v in options.items()
                   if k in ("length", "width", "total_thickness", "actuator_thickness")},
            )
            return {"result": rel(out), "sigma0_mpa": doc["sigma0_mpa"],
                    "converged": doc["converged"]}
        if kind == "calibrate":
            out = out_dir / f"{options.get('name', 'material')}.matcard.json"
            summary = run_calibrate(
                str(options.get("name", "material")),
                project.root / resolved["loading"],
                [project.root / resolved[k]
                 for k in sorted(resolved) if k.startswith("unloading:")],
                out,
                sweep_csv=(project.root / resolved["sweep"]) if "sweep" in resolved else None,
                alpha_t=float(options["alpha_t"]),
                poisson=float(options["poisson"]),
                density=float(options.get("density", 1240.0)),
            )
            return {"card": rel(out), "summary": summary}
        if kind == "measure":
            out = out_dir / "report.json"
            summary = run_measure(
                project.root / resolved["state"],
                project.root / resolved["measurements"],
                out,
                mesh_path=(project.root / resolved["mesh"]) if "mesh" in resolved else None,
            )
            return {"report": rel(out), "summary": summary,
                    "report_doc": json.loads(out.read_text(encoding="utf-8"))}
        if kind == "report":
            out = out_dir / "report.json"
            report = run_report(
                [project.root / resolved[k]
                 for k in sorted(resolved) if k.startswith("measurements:")],
                out,
            )
            return {"report": rel(out), "n": report.n, "ci95": list(report.ci95),
                    "report_doc": json.loads(out.read_text(encoding="utf-8"))}
        if kind == "ingest":
            out = out_dir / "canonical.csv"
            summary = run_ingest(project.root / resolved["input"], out,
                                 smooth=bool(options.get("smooth", False)))
            return {"canonical": rel(out), "summary": summary}
        raise ValueError(f"unknown job kind {kind!r}")  # pragma: no cover

    store = JobStore(run_job, max_workers=max_workers)

    @asynccontextmanager
    async def lifespan(_: FastAPI):
        yield
        store.shutdown()

    app = FastAPI(title="morphgrid workbench", version="0.1.0", lifespan=lifespan)

    # --- documents -----------------------------------------------------------

    def get_document(category: str, name: str) -> Response:
        try:
            data, etag = project.get_document(category, name)
        except FileNotFoundError:
            raise HTTPException(404, detail=f"unknown {category} document {name!r}") from None
        return Response(content=data, media_type="application/json"
                        if CATEGORIES[category].endswith(".json") else "text/csv",
                        headers={"ETag": etag})

    async def put_document(category: str, name: str, request: Request) -> dict:
        data = await request.body()
        expected = request.headers.get("If-Match")
        try:
            etag = project.put_document(category, name, data, expected_etag=expected)
        except VersionConflict as exc:
            raise HTTPException(409, detail=str(exc)) from exc
        except (InvalidDocument, MorphGridError, ValueError) as exc:
            raise HTTPException(422, detail=str(exc)) from exc
        return {"format_version": API_FORMAT_VERSION, "kind": "put_result",
                "name": name, "etag": etag}

    @app.get("/materials")
    def list_materials() -> dict:
        return {"format_version": API_FORMAT_VERSION, "kind": "document_list",
                "names": project.list_documents("materials")}

    @app.get("/materials/{name}")
    def get_material(name: str) -> Response:
        return get_document("materials", name)

    @app.put("/materials/{name}")
    async def put_material(name: str, request: Request) -> dict:
        return await put_document("materials", name, request)

    @app.get("/designs")
    def list_designs() -> dict:
        return {"format_version": API_FORMAT_VERSION, "kind": "document_list",
                "names": project.list_documents("designs")}

    @app.get("/designs/{name}")
    def get_design(name: str) -> Response:
        return get_document("designs", name)

    @app.put("/designs/{name}")
    async def put_design(name: str, request: Request) -> dict:
        return await put_document("designs", name, request)

    @app.get("/observations")
    def list_observations() -> dict:
        return {"format_version": API_FORMAT_VERSION, "kind": "document_list",
                "names": project.list_documents("observations")}

    @app.put("/observations/{name}")
    async def put_observation(name: str, request: Request) -> dict:
        return await put_document("observations", name, request)

    @app.get("/observations/{name}")
    def get_observation(name: str) -> Response:
        return get_document("observations", name)

    @app.get("/measurements")
    def list_measurements() -> dict:
        return {"format_version": API_FORMAT_VERSION, "kind": "document_list",
                "names": project.list_documents("measurements")}

    @app.put("/measurements/{name}")
    async def put_measurement(name: str, request: Request) -> dict:
        return await put_document("measurements", name, request)

    @app.get("/measurements/{name}")
    def get_measurement(name: str) -> Response:
        return get_document("measurements", name)

    # --- jobs ----------------------------------------------------------------

    @app.post("/jobs")
    async def post_job(request: Request) -> dict:
        try:
            body = await request.json()
        except json.JSONDecodeError as exc:
            raise HTTPException(422, detail=f"invalid JSON body: {exc}") from exc
        if not isinstance(body, dict):
            raise HTTPException(422, detail="job body must be an object")
        kind = body.get("kind")
        if kind not in JOB_KINDS:
            raise HTTPException(422, detail=f"unknown job kind {kind!r}")
        inputs = body.get("inputs")
        if not isinstance(inputs, dict):
            raise HTTPException(422, detail="job body needs an 'inputs' object")
        options = body.get("options", {})
        if not isinstance(options, dict):
            raise HTTPException(422, detail="'options' must be an object")
        if kind == "calibrate":
            for key in ("alpha_t", "poisson"):
                if key not in options:
                    raise HTTPException(422, detail=f"calibrate job needs option {key!r}")
        files = _job_files(project, store, kind, inputs)
        root = project.root.resolve()
        resolved = {k: str(p.resolve().relative_to(root)) for k, p in files.items()}
        hashes = {k: hash_file(p) for k, p in sorted(files.items())}
        params = {"inputs": inputs, "options": options, "resolved": resolved}
        inputs_hash = content_hash(kind, {"inputs": inputs, "options": options}, hashes)
        record = store.submit(kind, params, inputs_hash)
        return record.to_dict()

    @app.get("/jobs/{job_id}")
    def get_job(job_id: str) -> dict:
        record = store.get(job_id)
        if record is None:
            raise HTTPException(404, detail=f"unknown job {job_id!r}")
        return record.to_dict()

    # --- states --------------------------------------------------------------

    @app.get("/states/{state_id}")
    def get_state(state_id: str) -> Response:
        path, _ = _state_paths(project, store, state_id)
        return Response(content=path.read_bytes(), media_type="application/json")

    @app.get("/states/{state_id}/mesh")
    def get_state_mesh(state_id: str) -> dict:
        state_path, mesh_path = _state_paths(project, store, state_id)
        if mesh_path is None or not mesh_path.exists():
            raise HTTPException(404, detail=f"no mesh recorded for state {state_id!r}")
        mesh_doc = json.loads(mesh_path.read_text(encoding="utf-8"))
        state_doc = json.loads(state_path.read_text(encoding="utf-8"))
        deformed = {n["id"]: n["position_mm"] for n in state_doc["nodes"]}
        for node in mesh_doc["nodes"]:
            node["position_mm"] = deformed.get(node["id"], node["position_mm"])
        mesh_doc["kind"] = "deformed_mesh"
        mesh_doc["state_id"] = state_id
        return mesh_doc

    return app
