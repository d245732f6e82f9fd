"""HTTP API exposing recipes, inspection runs, overlays and statistics.

Desk-scale persistence: recipes and runs live as JSON + PNG files under a
data directory.  Recipe edits use optimistic concurrency — the client
sends the revision its edit is based on, a mismatch is a 409 — so a live
tweak loop cannot silently overwrite a colleague's change.  Dryruns run a
transient recipe against the stored reference image without persisting
anything.
"""

from __future__ import annotations

import json
import os
import re
import threading
import time
from pathlib import Path

from fastapi import FastAPI, File, Form, HTTPException, UploadFile
from fastapi.responses import JSONResponse, PlainTextResponse, Response
from fastapi.staticfiles import StaticFiles

from . import flowchart
from .inspection import (
    ConfigError,
    InspectionReport,
    MeasurementResult,
    Recipe,
    compute_stats,
    inspect as run_inspect,
    report_to_dict,
)
from .overlay import annotations_to_json, render
from .raster import CorruptFile, UnsupportedFormat, decode, encode_rgb_png

_ID_RE = re.compile(r"^[A-Za-z0-9_][A-Za-z0-9_.]*$")


class Store:
    """Filesystem-backed recipe and run storage with a mutation lock."""

    def __init__(self, root: Path):
        self.root = root
        self.recipes_dir = root / "recipes"
        self.runs_dir = root / "runs"
        self.recipes_dir.mkdir(parents=True, exist_ok=True)
        self.runs_dir.mkdir(parents=True, exist_ok=True)
        self.lock = threading.Lock()

    # -- recipes ------------------------------------------------------------

    def recipe_dir(self, recipe_id: str) -> Path:
        return self.recipes_dir / recipe_id

    def recipe_revision(self, recipe_id: str) -> int | None:
        meta = self.recipe_dir(recipe_id) / "meta.json"
        if not meta.exists():
            return None
        return int(json.loads(meta.read_text())["revision"])

    def put_recipe(self, recipe_id: str, recipe_json: str, image_bytes: bytes) -> tuple[int, bool]:
        d = self.recipe_dir(recipe_id)
        created = not d.exists()
        d.mkdir(parents=True, exist_ok=True)
        (d / "source.png").write_bytes(image_bytes)
        (d / "recipe.json").write_text(recipe_json)
        revision = (self.recipe_revision(recipe_id) or 0) + 1
        (d / "meta.json").write_text(json.dumps({"revision": revision}) + "\n")
        return revision, created

    def load_recipe(self, recipe_id: str) -> Recipe:
        d = self.recipe_dir(recipe_id)
        if not (d / "recipe.json").exists():
            raise HTTPException(404, f"no recipe {recipe_id!r}")
        source = decode((d / "source.png").read_bytes(), name="source.png")
        obj = json.loads((d / "recipe.json").read_text())
        return Recipe.from_dict(obj, source, recipe_id=recipe_id)

    def list_recipes(self) -> list[dict]:
        out = []
        for d in sorted(self.recipes_dir.iterdir()):
            if (d / "recipe.json").exists():
                out.append({"id": d.name, "revision": self.recipe_revision(d.name)})
        return out

    # -- runs ----------------------------------------------------------------

    def next_run_seq(self, recipe_id: str) -> int:
        d = self.runs_dir / recipe_id
        d.mkdir(parents=True, exist_ok=True)
        existing = [int(p.name) for p in d.iterdir() if p.name.isdigit()]
        return max(existing, default=0) + 1

    def run_dir(self, recipe_id: str, seq: int) -> Path:
        return self.runs_dir / recipe_id / f"{seq:06d}"

    def resolve_run(self, run_id: str) -> Path:
        if "-" not in run_id:
            raise HTTPException(404, f"unknown run {run_id!r}")
        recipe_id, seq = run_id.rsplit("-", 1)
        if not seq.isdigit():
            raise HTTPException(404, f"unknown run {run_id!r}")
        d = self.runs_dir / recipe_id / seq
        if not d.exists():
            raise HTTPException(404, f"unknown run {run_id!r}")
        return d

    def run_reports(self, recipe_id: str) -> list[dict]:
        d = self.runs_dir / recipe_id
        if not d.exists():
            return []
        reports = []
        for p in sorted(d.iterdir()):
            rp = p / "report.json"
            if rp.exists():
                reports.append(json.loads(rp.read_text()))
        return reports

    def state_fingerprint(self) -> str:
        """Hash of all stored paths, sizes and mtimes (dryrun no-mutation check)."""
        entries = []
        for p in sorted(self.root.rglob("*")):
            if p.is_file():
                st = p.stat()
                entries.append(f"{p.relative_to(self.root)}:{st.st_size}:{st.st_mtime_ns}")
        return str(hash("\n".join(entries)))


def _report_from_dict(d: dict) -> InspectionReport:
    """Rehydrate a stored report enough for the stats fold."""
    measurements = tuple(
        MeasurementResult(
            name=m["name"],
            kind=m["kind"],
            value=m["value"],
            verdict=m.get("verdict"),
            error=m.get("error"),
            block_id=m.get("block_id", ""),
        )
        for m in d.get("measurements", [])
    )
    return InspectionReport(
        recipe_id=d["recipe_id"],
        image_ref=d["image"],
        overall=d["overall"],
        registration_score=d.get("registration", {}).get("score"),
        registration=d.get("registration", {}).get("transform"),
        measurements=measurements,
        timing_ms=d.get("timing_ms", {}),
    )


def _validate_recipe_payload(obj: dict) -> list[dict]:
    """Structured diagnostics for a recipe's graph (422 payload)."""
    try:
        graph = flowchart.graph_from_dict(obj.get("graph", {}), path="$.graph")
    except flowchart.SchemaError as exc:
        return [{"code": "SchemaError", "message": str(exc), "blocks": []}]
    return [
        {"code": d.code, "message": d.message, "blocks": list(d.blocks)}
        for d in flowchart.validate(graph)
    ]


def create_app(data_dir=None, ui_dir=None) -> FastAPI:
    root = Path(data_dir or os.environ.get("REGISTRA_DATA_DIR", "registra-data"))
    store = Store(root)
    app = FastAPI(title="registra", version="0.1.0")
    app.state.store = store

    @app.put("/recipes/{recipe_id}")
    async def put_recipe(
        recipe_id: str,
        recipe: UploadFile = File(...),
        source_image: UploadFile = File(...),
        revision: int | None = Form(None),
    ):
        if not _ID_RE.match(recipe_id):
            raise HTTPException(422, "recipe id must match [A-Za-z0-9_][A-Za-z0-9_.]*")
        recipe_text = (await recipe.read()).decode("utf-8")
        image_bytes = await source_image.read()
        try:
            obj = json.loads(recipe_text)
        except json.JSONDecodeError as exc:
            raise HTTPException(422, f"recipe is not valid JSON: {exc}")
        diags = _validate_recipe_payload(obj)
        if diags:
            return JSONResponse(status_code=422, content={"diagnostics": diags})
        try:
            source = decode(image_bytes, name=source_image.filename or "upload")
        except (UnsupportedFormat, CorruptFile) as exc:
            raise HTTPException(422, f"source image: {exc}")
        try:
            parsed = Recipe.from_dict(obj, source, recipe_id=recipe_id)
        except (ConfigError, flowchart.SchemaError) as exc:
            return JSONResponse(
                status_code=422,
                content={"diagnostics": [{"code": "ConfigError", "message": str(exc), "blocks": []}]},
            )
        with store.lock:
            current = store.recipe_revision(recipe_id)
            base = revision or 0
            if (current or 0) != base:
                raise HTTPException(
                    409,
                    f"revision conflict: stored revision is {current or 0}, "
                    f"request was based on {base}",
                )
            obj["id"] = recipe_id
            obj["source_image"] = "source.png"
            canonical = json.dumps(obj, sort_keys=True, indent=2) + "\n"
            new_revision, created = store.put_recipe(recipe_id, canonical, image_bytes)
        return JSONResponse(
            status_code=201 if created else 200,
            content={"id": recipe_id, "revision": new_revision, "created": created},
        )

    @app.get("/recipes")
    def list_recipes():
        return {"recipes": store.list_recipes()}

    @app.get("/recipes/{recipe_id}")
    def get_recipe(recipe_id: str):
        d = store.recipe_dir(recipe_id)
        if not (d / "recipe.json").exists():
            raise HTTPException(404, f"no recipe {recipe_id!r}")
        return {
            "id": recipe_id,
            "revision": store.recipe_revision(recipe_id),
            "recipe": json.loads((d / "recipe.json").read_text()),
        }

    @app.get("/recipes/{recipe_id}/source.png")
    def get_recipe_source(recipe_id: str):
        p = store.recipe_dir(recipe_id) / "source.png"
        if not p.exists():
            raise HTTPException(404, f"no recipe {recipe_id!r}")
        return Response(content=p.read_bytes(), media_type="image/png")

    @app.post("/recipes/{recipe_id}/runs")
    async def post_run(recipe_id: str, image: UploadFile = File(...)):
        recipe_obj = store.load_recipe(recipe_id)
        image_bytes = await image.read()
        try:
            target = decode(image_bytes, name=image.filename or "upload")
        except (UnsupportedFormat, CorruptFile) as exc:
            raise HTTPException(422, f"image: {exc}")
        report, annotations = run_inspect(recipe_obj, target, image_ref=image.filename or "upload")
        with store.lock:
            seq = store.next_run_seq(recipe_id)
            run_id = f"{recipe_id}-{seq:06d}"
            d = store.run_dir(recipe_id, seq)
            d.mkdir(parents=True, exist_ok=True)
        report_dict = report_to_dict(report, include_timing=True)
        (d / "report.json").write_text(json.dumps(report_dict, sort_keys=True, indent=2) + "\n")
        (d / "annotations.json").write_text(annotations_to_json(annotations))
        (d / "overlay.png").write_bytes(encode_rgb_png(render(target, annotations)))
        (d / "meta.json").write_text(
            json.dumps(
                {
                    "run_id": run_id,
                    "recipe_id": recipe_id,
                    "image": image.filename or "upload",
                    "created_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
                },
                sort_keys=True,
            )
            + "\n"
        )
        return {
            "run_id": run_id,
            "recipe_id": recipe_id,
            "report": report_dict,
            "links": {
                "report": f"/runs/{run_id}/report.json",
                "overlay": f"/runs/{run_id}/overlay.png",
                "annotations": f"/runs/{run_id}/annotations.json",
            },
        }

    @app.get("/runs/{run_id}/report.json")
    def get_run_report(run_id: str):
        return JSONResponse(content=json.loads((store.resolve_run(run_id) / "report.json").read_text()))

    @app.get("/runs/{run_id}/annotations.json")
    def get_run_annotations(run_id: str):
        return JSONResponse(
            content=json.loads((store.resolve_run(run_id) / "annotations.json").read_text())
        )

    @app.get("/runs/{run_id}/overlay.png")
    def get_run_overlay(run_id: str):
        return Response(
            content=(store.resolve_run(run_id) / "overlay.png").read_bytes(), media_type="image/png"
        )

    @app.get("/recipes/{recipe_id}/runs")
    def list_runs(recipe_id: str):
        if not (store.recipe_dir(recipe_id) / "recipe.json").exists():
            raise HTTPException(404, f"no recipe {recipe_id!r}")
        runs = []
        d = store.runs_dir / recipe_id
        if d.exists():
            for p in sorted(d.iterdir()):
                meta = p / "meta.json"
                report = p / "report.json"
                if meta.exists() and report.exists():
                    entry = json.loads(meta.read_text())
                    entry["overall"] = json.loads(report.read_text())["overall"]
                    runs.append(entry)
        return {"runs": runs}

    @app.get("/recipes/{recipe_id}/stats")
    def get_stats(recipe_id: str):
        if not (store.recipe_dir(recipe_id) / "recipe.json").exists():
            raise HTTPException(404, f"no recipe {recipe_id!r}")
        reports = [_report_from_dict(d) for d in store.run_reports(recipe_id)]
        return compute_stats(reports).to_dict()

    @app.post("/recipes/{recipe_id}/dryrun")
    async def post_dryrun(
        recipe_id: str,
        image: UploadFile = File(...),
        recipe: UploadFile | None = File(None),
    ):
        stored = store.load_recipe(recipe_id)
        image_bytes = await image.read()
        try:
            target = decode(image_bytes, name=image.filename or "upload")
        except (UnsupportedFormat, CorruptFile) as exc:
            raise HTTPException(422, f"image: {exc}")
        active = stored
        if recipe is not None:
            text = (await recipe.read()).decode("utf-8")
            try:
                obj = json.loads(text)
            except json.JSONDecodeError as exc:
                raise HTTPException(422, f"recipe is not valid JSON: {exc}")
            diags = _validate_recipe_payload(obj)
            if diags:
                return JSONResponse(status_code=422, content={"diagnostics": diags})
            try:
                active = Recipe.from_dict(obj, stored.source, recipe_id=recipe_id)
            except (ConfigError, flowchart.SchemaError) as exc:
                return JSONResponse(
                    status_code=422,
                    content={
                        "diagnostics": [{"code": "ConfigError", "message": str(exc), "blocks": []}]
                    },
                )
        report, _ = run_inspect(active, target, image_ref=image.filename or "upload")
        return {"report": report_to_dict(report, include_timing=True), "dryrun": True}

    @app.get("/healthz", response_class=PlainTextResponse)
    def healthz():
        return "ok"

    ui_root = Path(ui_dir) if ui_dir else Path(os.environ.get("REGISTRA_UI_DIR", "frontend/dist"))
    if ui_root.is_dir():
        app.mount("/ui", StaticFiles(directory=str(ui_root), html=True), name="ui")

    return app
