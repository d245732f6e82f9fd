import io
import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from registra.demo import make_demo_recipe, make_demo_scene
from registra.inspection import report_to_canonical_json, inspect as run_inspect
from registra.raster import Image, save
from registra.service import create_app


@pytest.fixture(scope="module")
def scene():
    return make_demo_scene()


@pytest.fixture(scope="module")
def recipe_json(scene):
    return make_demo_recipe(scene).to_canonical_json("source.png")


@pytest.fixture(scope="module")
def scene_png(scene, tmp_path_factory):
    p = tmp_path_factory.mktemp("svc") / "scene.png"
    save(scene, p)
    return p.read_bytes()


@pytest.fixture()
def client(tmp_path):
    app = create_app(data_dir=tmp_path / "data")
    with TestClient(app) as c:
        c.store = app.state.store
        yield c


def put_recipe(client, recipe_json, scene_png, recipe_id="demo", revision=None):
    data = {}
    if revision is not None:
        data["revision"] = str(revision)
    return client.put(
        f"/recipes/{recipe_id}",
        files={
            "recipe": ("recipe.json", recipe_json, "application/json"),
            "source_image": ("source.png", scene_png, "image/png"),
        },
        data=data,
    )


def test_put_then_get_recipe(client, recipe_json, scene_png):
    r = put_recipe(client, recipe_json, scene_png)
    assert r.status_code == 201
    assert r.json() == {"id": "demo", "revision": 1, "created": True}
    g = client.get("/recipes/demo")
    assert g.status_code == 200
    body = g.json()
    assert body["revision"] == 1
    assert body["recipe"]["source_image"] == "source.png"
    listing = client.get("/recipes").json()
    assert listing["recipes"] == [{"id": "demo", "revision": 1}]


def test_stale_revision_conflicts(client, recipe_json, scene_png):
    assert put_recipe(client, recipe_json, scene_png).status_code == 201
    # replay without the current revision: rejected, not last-writer-wins
    r = put_recipe(client, recipe_json, scene_png)
    assert r.status_code == 409
    r = put_recipe(client, recipe_json, scene_png, revision=1)
    assert r.status_code == 200
    assert r.json()["revision"] == 2


def test_put_cyclic_graph_is_422_listing_cycle(client, recipe_json, scene_png):
    obj = json.loads(recipe_json)
    obj["graph"]["connections"] = [
        c
        for c in obj["graph"]["connections"]
        if c["to"] not in (["tol_angle", "value"], ["tol_dist", "value"])
    ] + [
        {"from": ["tol_angle", "verdict"], "to": ["tol_dist", "value"]},
        {"from": ["tol_dist", "verdict"], "to": ["tol_angle", "value"]},
    ]
    r = put_recipe(client, json.dumps(obj), scene_png)
    assert r.status_code == 422
    diags = r.json()["diagnostics"]
    cycle = next(d for d in diags if d["code"] == "Cycle")
    assert set(cycle["blocks"]) == {"tol_angle", "tol_dist"}


def test_run_source_as_target_passes(client, recipe_json, scene_png):
    put_recipe(client, recipe_json, scene_png)
    r = client.post("/recipes/demo/runs", files={"image": ("t.png", scene_png, "image/png")})
    assert r.status_code == 200
    body = r.json()
    assert body["report"]["overall"] == "PASS"
    assert body["run_id"] == "demo-000001"
    for key, media in (("report", "application/json"), ("overlay", "image/png"), ("annotations", "application/json")):
        resp = client.get(body["links"][key])
        assert resp.status_code == 200, key
    overlay = client.get(body["links"]["overlay"])
    assert overlay.content[:8] == b"\x89PNG\r\n\x1a\n"


def test_reject_verdict_is_200_not_error(client, recipe_json, scene_png, tmp_path):
    put_recipe(client, recipe_json, scene_png)
    rng = np.random.default_rng(1)
    noise_path = tmp_path / "noise.png"
    save(Image(rng.uniform(0, 1, (480, 640))), noise_path)
    r = client.post(
        "/recipes/demo/runs", files={"image": ("noise.png", noise_path.read_bytes(), "image/png")}
    )
    assert r.status_code == 200
    assert r.json()["report"]["overall"] == "REJECT-NO-REGISTRATION"


def test_stats_fold_matches_reports(client, recipe_json, scene_png, tmp_path):
    put_recipe(client, recipe_json, scene_png)
    defect_path = tmp_path / "defect.png"
    save(make_demo_scene(edge_b_deg=82.0), defect_path)
    client.post("/recipes/demo/runs", files={"image": ("a.png", scene_png, "image/png")})
    client.post("/recipes/demo/runs", files={"image": ("b.png", defect_path.read_bytes(), "image/png")})
    stats = client.get("/recipes/demo/stats").json()
    assert stats["total"] == 2 and stats["pass"] == 1 and stats["fail"] == 1
    runs = client.get("/recipes/demo/runs").json()["runs"]
    assert [r["overall"] for r in runs] == ["PASS", "FAIL"]
    # independent fold over the stored reports
    values = []
    for r in runs:
        doc = client.get(f"/runs/{r['run_id']}/report.json").json()
        values.append(next(m["value"] for m in doc["measurements"] if m["name"] == "angle"))
    assert stats["per_measurement"]["angle"]["mean"] == pytest.approx(sum(values) / 2)


def test_dryrun_flips_verdict_without_mutating_state(client, recipe_json, scene_png, tmp_path):
    put_recipe(client, recipe_json, scene_png)
    defect_path = tmp_path / "defect.png"
    save(make_demo_scene(edge_b_deg=82.0), defect_path)
    defect_bytes = defect_path.read_bytes()

    r = client.post("/recipes/demo/dryrun", files={"image": ("d.png", defect_bytes, "image/png")})
    assert r.status_code == 200
    assert r.json()["report"]["overall"] == "FAIL"

    before = client.store.state_fingerprint()
    widened = json.loads(recipe_json)
    for t in widened["tolerances"]:
        if t["measurement_name"] == "angle":
            t["min"], t["max"] = 40.0, 60.0
    r = client.post(
        "/recipes/demo/dryrun",
        files={
            "image": ("d.png", defect_bytes, "image/png"),
            "recipe": ("recipe.json", json.dumps(widened), "application/json"),
        },
    )
    assert r.status_code == 200
    assert r.json()["report"]["overall"] == "PASS"
    assert client.store.state_fingerprint() == before
    assert client.get("/recipes/demo").json()["revision"] == 1


def test_unknown_ids_are_404(client, recipe_json, scene_png):
    assert client.get("/recipes/ghost").status_code == 404
    assert client.get("/runs/ghost-000001/report.json").status_code == 404
    assert client.get("/recipes/ghost/stats").status_code == 404
    r = client.post("/recipes/ghost/runs", files={"image": ("t.png", scene_png, "image/png")})
    assert r.status_code == 404


def test_http_report_matches_cli_canonical_report(client, recipe_json, scene_png):
    put_recipe(client, recipe_json, scene_png)
    body = client.post(
        "/recipes/demo/runs", files={"image": ("t.png", scene_png, "image/png")}
    ).json()
    http_report = dict(body["report"])
    http_report.pop("timing_ms", None)
    http_canonical = json.dumps(http_report, sort_keys=True, indent=2) + "\n"

    # same inputs means same bytes: both sides decode the uploaded PNG
    from registra.inspection import Recipe
    from registra.raster import decode

    decoded = decode(scene_png)
    recipe = Recipe.from_dict(json.loads(recipe_json), decoded, recipe_id="demo")
    report, _ = run_inspect(recipe, decoded, image_ref="t.png")
    assert http_canonical == report_to_canonical_json(report)
