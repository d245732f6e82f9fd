"""Command-line front door for the inspection engine.

Exit codes are a stable scripting contract:

* 0 — PASS / success
* 1 — FAIL
* 2 — REJECT-NO-REGISTRATION
* 3 — config or schema error
* 4 — I/O error

Machine-readable outputs (report JSON, CSV) are canonical and
deterministic; ``--jobs`` parallelism never changes a byte.
"""

from __future__ import annotations

import json
import logging
import os
import sys
import time
from pathlib import Path

import click
import numpy as np

from . import flowchart, inspection, raster
from .demo import make_demo_recipe, make_demo_scene
from .geometry import decompose, from_similarity
from .inspection import (
    ConfigError,
    Recipe,
    VERDICT_FAIL,
    VERDICT_PASS,
    VERDICT_REJECT,
    batch_run,
    inspect as run_inspect,
    report_to_json,
    reports_to_csv,
)
from .overlay import annotations_to_json, render
from .raster import CorruptFile, IoFailure, UnsupportedFormat, load, save, save_rgb, warp_similarity
from .registration import RegistrationFailed, register

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_REJECT = 2
EXIT_CONFIG = 3
EXIT_IO = 4

log = logging.getLogger("registra")


def _setup_logging() -> None:
    level = os.environ.get("REGISTRA_LOG", "error").lower()
    logging.basicConfig(
        level={"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}.get(
            level, logging.ERROR
        ),
        format="%(levelname)s %(name)s: %(message)s",
    )


def _fail(code: int, message: str) -> None:
    click.echo(message, err=True)
    sys.exit(code)


def _load_recipe(path: str) -> Recipe:
    try:
        return Recipe.load(path)
    except (IoFailure, FileNotFoundError) as exc:
        _fail(EXIT_IO, f"io error: {exc}")
    except (ConfigError, flowchart.SchemaError) as exc:
        _fail(EXIT_CONFIG, f"recipe error: {exc}")


def _load_image(path: str) -> raster.Image:
    try:
        return load(path)
    except (IoFailure, UnsupportedFormat, CorruptFile) as exc:
        _fail(EXIT_IO, f"io error: {exc}")


@click.group()
def main() -> None:
    """Visual inspection engine: define once on a reference image, measure anywhere."""
    _setup_logging()


@main.command("validate")
@click.option("--recipe", "recipe_path", required=True, type=click.Path())
def cmd_validate(recipe_path: str) -> None:
    """Check a recipe's flowchart and configuration; exit 0 iff clean."""
    path = Path(recipe_path)
    try:
        obj = json.loads(path.read_text())
    except OSError as exc:
        _fail(EXIT_IO, f"io error: {exc}")
    except json.JSONDecodeError as exc:
        _fail(EXIT_CONFIG, f"schema error: invalid JSON: {exc}")
    try:
        graph = flowchart.graph_from_dict(obj.get("graph", {}), path="$.graph")
    except flowchart.SchemaError as exc:
        _fail(EXIT_CONFIG, f"schema error: {exc}")
    diags = flowchart.validate(graph)
    produced = None
    if not diags:
        produced = set(graph.measurement_names())
        for t in obj.get("tolerances", []):
            name = t.get("measurement_name")
            if name not in produced:
                diags.append(
                    flowchart.Diagnostic(
                        "UnknownMeasurement", f"tolerance references unknown measurement {name!r}"
                    )
                )
    if diags:
        for d in diags:
            click.echo(str(d), err=True)
        sys.exit(EXIT_CONFIG)
    click.echo("OK")


@main.command("inspect")
@click.option("--recipe", "recipe_path", required=True, type=click.Path())
@click.option("--image", "image_path", required=True, type=click.Path())
@click.option("--report", "report_path", type=click.Path(), default=None)
@click.option("--overlay", "overlay_path", type=click.Path(), default=None)
@click.option("--annotations", "annotations_path", type=click.Path(), default=None)
@click.option("--csv", "as_csv", is_flag=True, help="Emit a one-row CSV instead of the summary.")
def cmd_inspect(recipe_path, image_path, report_path, overlay_path, annotations_path, as_csv) -> None:
    """Inspect one image; the exit code mirrors the verdict."""
    recipe = _load_recipe(recipe_path)
    target = _load_image(image_path)
    report, annotations = run_inspect(recipe, target, image_ref=str(image_path))
    if report_path:
        Path(report_path).write_text(report_to_json(report))
    if overlay_path:
        save_rgb(render(target, annotations), overlay_path)
    if annotations_path:
        Path(annotations_path).write_text(annotations_to_json(annotations))
    tol_names = [t.measurement_name for t in recipe.tolerances]
    if as_csv:
        click.echo(reports_to_csv([report], tol_names), nl=False)
    else:
        click.echo(f"{report.overall}  recipe={report.recipe_id}  image={report.image_ref}")
        if report.registration is not None:
            r = report.registration
            click.echo(
                f"registration: score={report.registration_score:.4f} "
                f"tx={r['tx']:.3f} ty={r['ty']:.3f} theta={r['theta_deg']:.3f} scale={r['scale']:.4f}"
            )
        elif report.registration_score is not None:
            click.echo(f"registration: score={report.registration_score:.4f} (below threshold)")
        for m in report.measurements:
            if m.error is not None:
                click.echo(f"  {m.name}: ERROR {m.error}")
            else:
                band = f" in [{m.tolerance[0]}, {m.tolerance[1]}]" if m.tolerance else ""
                verdict = f" {m.verdict}" if m.verdict else ""
                click.echo(f"  {m.name} = {m.value:.6g}{band}{verdict}")
    sys.exit(
        {VERDICT_PASS: EXIT_PASS, VERDICT_FAIL: EXIT_FAIL, VERDICT_REJECT: EXIT_REJECT}.get(
            report.overall, EXIT_FAIL
        )
    )


@main.command("batch")
@click.option("--recipe", "recipe_path", required=True, type=click.Path())
@click.option("--dir", "image_dir", type=click.Path(), default=None)
@click.option("--list", "list_path", type=click.Path(), default=None)
@click.option("--csv", "csv_path", type=click.Path(), default=None)
@click.option("--jobs", type=int, default=1, show_default=True)
def cmd_batch(recipe_path, image_dir, list_path, csv_path, jobs) -> None:
    """Inspect every image in a directory or list file; exit 0 iff all pass."""
    if (image_dir is None) == (list_path is None):
        _fail(EXIT_CONFIG, "supply exactly one of --dir or --list")
    recipe = _load_recipe(recipe_path)
    if image_dir is not None:
        root = Path(image_dir)
        if not root.is_dir():
            _fail(EXIT_IO, f"io error: {root} is not a directory")
        paths = sorted(p for p in root.iterdir() if p.suffix.lower() in (".png", ".pgm"))
    else:
        try:
            lines = Path(list_path).read_text().splitlines()
        except OSError as exc:
            _fail(EXIT_IO, f"io error: {exc}")
        paths = [Path(line.strip()) for line in lines if line.strip()]
    reports, stats = batch_run(recipe, paths, jobs=max(1, jobs))
    tol_names = [t.measurement_name for t in recipe.tolerances]
    if csv_path:
        Path(csv_path).write_text(reports_to_csv(reports, tol_names))
    s = stats.to_dict()
    click.echo(
        f"total={s['total']} pass={s['pass']} fail={s['fail']} "
        f"reject={s['reject']} io_error={s['io_error']}"
    )
    sys.exit(EXIT_PASS if s["total"] == s["pass"] else EXIT_FAIL)


@main.command("synth")
@click.option("--image", "image_path", required=True, type=click.Path())
@click.option("--tx", type=float, default=0.0, show_default=True)
@click.option("--ty", type=float, default=0.0, show_default=True)
@click.option("--theta", type=float, default=0.0, show_default=True)
@click.option("--scale", type=float, default=1.0, show_default=True)
@click.option("--noise", "noise_sigma", type=float, default=0.0, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--fill", type=float, default=0.0, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
def cmd_synth(image_path, tx, ty, theta, scale, noise_sigma, seed, fill, out_path) -> None:
    """Warp an image by a known similarity (test-target generator)."""
    img = _load_image(image_path)
    try:
        t = from_similarity(tx, ty, theta, scale)
    except ValueError as exc:
        _fail(EXIT_CONFIG, f"invalid transform: {exc}")
    warped = warp_similarity(img, t, fill=fill)
    if noise_sigma > 0:
        rng = np.random.default_rng(seed)
        noisy = np.clip(warped.pixels + rng.normal(0.0, noise_sigma, warped.pixels.shape), 0.0, 1.0)
        warped = raster.Image(noisy)
    try:
        save(warped, out_path)
    except (IoFailure, UnsupportedFormat) as exc:
        _fail(EXIT_IO, f"io error: {exc}")
    click.echo(f"wrote {out_path}")


@main.command("register")
@click.option("--recipe", "recipe_path", required=True, type=click.Path())
@click.option("--image", "image_path", required=True, type=click.Path())
def cmd_register(recipe_path, image_path) -> None:
    """Run registration alone and print the decomposed transform."""
    recipe = _load_recipe(recipe_path)
    target = _load_image(image_path)
    t0 = time.perf_counter()
    try:
        result = register(recipe.model, target)
    except RegistrationFailed as exc:
        click.echo(f"REJECT score={exc.score:.4f} min_score={exc.min_score:.4f}", err=True)
        sys.exit(EXIT_REJECT)
    elapsed = time.perf_counter() - t0
    tx, ty, theta, scale = decompose(result.transform)
    click.echo(
        f"tx={tx:.6f} ty={ty:.6f} theta={theta:.6f} scale={scale:.6f} "
        f"score={result.score:.6f} elapsed_s={elapsed:.3f}"
    )


@main.command("demo")
@click.option("--out", "out_dir", required=True, type=click.Path())
def cmd_demo(out_dir) -> None:
    """Write the built-in demo scene and recipe into a directory."""
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    scene = make_demo_scene()
    save(scene, root / "source.png")
    recipe = make_demo_recipe(scene)
    (root / "recipe.json").write_text(recipe.to_canonical_json("source.png"))
    click.echo(f"wrote {root / 'source.png'} and {root / 'recipe.json'}")
    click.echo(f"try: registra inspect --recipe {root / 'recipe.json'} --image {root / 'source.png'}")


@main.command("serve")
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--data-dir", "data_dir", type=click.Path(), default=None, help="Defaults to $REGISTRA_DATA_DIR or ./registra-data.")
def cmd_serve(port, host, data_dir) -> None:
    """Start the HTTP service (recipes, runs, overlays, stats)."""
    import uvicorn

    from .service import create_app

    app = create_app(data_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
