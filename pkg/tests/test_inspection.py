import json

import numpy as np
import pytest

from registra.demo import DEMO_TOLERANCES, make_demo_recipe, make_demo_scene
from registra.geometry import Point2, Roi
from registra.inspection import (
    ConfigError,
    Recipe,
    Tolerance,
    VERDICT_FAIL,
    VERDICT_IO_ERROR,
    VERDICT_PASS,
    VERDICT_REJECT,
    batch_run,
    compute_stats,
    evaluate,
    inspect,
    report_to_canonical_json,
)
from registra.raster import Image, save, warp_similarity
from registra.tools import Measurement, MeasurementKind

from conftest import center_warp


def scalar(name, value):
    return Measurement(name=name, kind=MeasurementKind.DISTANCE_PX, value=value)


# -- evaluate -------------------------------------------------------------------


def test_value_inside_band_passes():
    verdicts, overall = evaluate([scalar("a", 45.0)], (Tolerance("a", 44.5, 45.5),))
    assert verdicts["a"] == VERDICT_PASS and overall == VERDICT_PASS


def test_band_is_inclusive_at_both_ends():
    for v in (44.5, 45.5):
        verdicts, overall = evaluate([scalar("a", v)], (Tolerance("a", 44.5, 45.5),))
        assert verdicts["a"] == VERDICT_PASS and overall == VERDICT_PASS


def test_value_just_outside_band_fails():
    verdicts, overall = evaluate([scalar("a", 45.51)], (Tolerance("a", 44.5, 45.5),))
    assert verdicts["a"] == VERDICT_FAIL and overall == VERDICT_FAIL


def test_dangling_tolerance_is_config_error():
    with pytest.raises(ConfigError):
        evaluate([scalar("a", 1.0)], (Tolerance("missing", 0, 1),))


def test_pass_monotonic_under_band_widening():
    rng = np.random.default_rng(5)
    for _ in range(200):
        v = rng.uniform(-10, 10)
        lo, hi = sorted(rng.uniform(-10, 10, 2))
        _, overall = evaluate([scalar("a", v)], (Tolerance("a", lo, hi),))
        _, wider = evaluate(
            [scalar("a", v)],
            (Tolerance("a", lo - abs(rng.uniform(0, 5)), hi + abs(rng.uniform(0, 5))),),
        )
        if overall == VERDICT_PASS:
            assert wider == VERDICT_PASS


# -- inspect ---------------------------------------------------------------------


def test_self_inspection_passes(demo_scene, demo_recipe):
    report, _ = inspect(demo_recipe, demo_scene, "self")
    assert report.overall == VERDICT_PASS
    assert report.registration_score >= 0.999


def test_warped_target_passes_with_same_values(demo_scene, demo_recipe):
    ref, _ = inspect(demo_recipe, demo_scene, "self")
    ref_values = {m.name: m.value for m in ref.measurements}
    t = center_warp(5.0, 1.03, 6.0, -4.0)
    target = warp_similarity(demo_scene, t, fill=0.3)
    report, _ = inspect(demo_recipe, target, "warped")
    assert report.overall == VERDICT_PASS
    got = {m.name: m.value for m in report.measurements}
    assert abs(got["angle"] - ref_values["angle"]) <= 0.5
    assert abs(got["dist"] - ref_values["dist"]) <= 0.5 + 0.01 * ref_values["dist"]
    assert abs(got["bright"] - ref_values["bright"]) <= 0.02
    assert abs(got["blobs_area"] - ref_values["blobs_area"]) <= 0.05 * ref_values["blobs_area"]


def test_defect_fails_naming_exactly_the_bad_measurement(demo_recipe):
    defect = make_demo_scene(edge_b_deg=82.0)  # angle becomes ~52 deg
    report, _ = inspect(demo_recipe, defect, "defect")
    assert report.overall == VERDICT_FAIL
    failing = [m.name for m in report.measurements if m.verdict == VERDICT_FAIL]
    assert failing == ["angle"]


def test_noise_target_rejected_not_failed(demo_recipe):
    rng = np.random.default_rng(6)
    noise = Image(rng.uniform(0, 1, (480, 640)))
    report, annotations = inspect(demo_recipe, noise, "noise")
    assert report.overall == VERDICT_REJECT
    assert report.overall != VERDICT_FAIL
    assert report.measurements == ()
    assert annotations == []
    assert report.registration_score is not None and report.registration_score < 0.6


def test_report_canonical_json_deterministic(demo_scene, demo_recipe):
    r1, _ = inspect(demo_recipe, demo_scene, "image.png")
    r2, _ = inspect(demo_recipe, demo_scene, "image.png")
    assert report_to_canonical_json(r1) == report_to_canonical_json(r2)
    # timing is excluded from the canonical form
    assert "timing" not in report_to_canonical_json(r1)


def test_units_per_px_reported_for_distances(demo_scene):
    recipe = Recipe(
        id="mm",
        source=demo_scene,
        template_roi=Roi(Point2(80, 80), 120, 120),
        search=make_demo_recipe(demo_scene).search,
        graph=make_demo_recipe(demo_scene).graph,
        tolerances=DEMO_TOLERANCES,
        units_per_px=0.04,
    )
    report, _ = inspect(recipe, demo_scene, "self")
    doc = json.loads(report_to_canonical_json(report))
    dist = next(m for m in doc["measurements"] if m["name"] == "dist")
    assert dist["value_units"] == pytest.approx(dist["value"] * 0.04)


# -- recipe validation --------------------------------------------------------------


def test_recipe_rejects_dangling_tolerance(demo_scene, demo_recipe):
    with pytest.raises(ConfigError):
        Recipe(
            id="bad",
            source=demo_scene,
            template_roi=demo_recipe.template_roi,
            search=demo_recipe.search,
            graph=demo_recipe.graph,
            tolerances=DEMO_TOLERANCES + (Tolerance("ghost", 0, 1),),
        )


def test_recipe_rejects_tolerance_check_without_band(demo_scene, demo_recipe):
    with pytest.raises(ConfigError):
        Recipe(
            id="bad",
            source=demo_scene,
            template_roi=demo_recipe.template_roi,
            search=demo_recipe.search,
            graph=demo_recipe.graph,
            tolerances=DEMO_TOLERANCES[:1],  # leaves most tolerance_check blocks dangling
        )


def test_recipe_canonical_json_fixpoint(demo_scene, demo_recipe, tmp_path):
    text = demo_recipe.to_canonical_json("source.png")
    save(demo_scene, tmp_path / "source.png")
    (tmp_path / "recipe.json").write_text(text)
    again = Recipe.load(tmp_path / "recipe.json")
    assert again.to_canonical_json("source.png") == text


# -- batch -----------------------------------------------------------------------


def test_batch_of_copies_has_zero_stddev(demo_scene, demo_recipe, tmp_path):
    paths = []
    for i in range(3):
        p = tmp_path / f"copy{i}.png"
        save(demo_scene, p)
        paths.append(p)
    reports, stats = batch_run(demo_recipe, paths)
    assert [r.overall for r in reports] == [VERDICT_PASS] * 3
    for entry in stats.per_measurement.values():
        assert entry["stddev"] == 0.0


def test_mixed_batch_counts(demo_scene, demo_recipe, tmp_path):
    defect = make_demo_scene(edge_b_deg=82.0)
    paths = []
    for i in range(3):
        p = tmp_path / f"good{i}.png"
        save(demo_scene, p)
        paths.append(p)
    for i in range(2):
        p = tmp_path / f"bad{i}.png"
        save(defect, p)
        paths.append(p)
    reports, stats = batch_run(demo_recipe, paths)
    s = stats.to_dict()
    assert (s["total"], s["pass"], s["fail"], s["reject"]) == (5, 3, 2, 0)


def test_empty_batch(demo_recipe):
    reports, stats = batch_run(demo_recipe, [])
    assert reports == []
    assert stats.to_dict()["total"] == 0
    assert stats.per_measurement == {}


def test_unreadable_file_gets_io_verdict_and_run_continues(demo_scene, demo_recipe, tmp_path):
    good = tmp_path / "good.png"
    save(demo_scene, good)
    bad = tmp_path / "broken.png"
    bad.write_bytes(b"not an image")
    reports, stats = batch_run(demo_recipe, [bad, good])
    assert reports[0].overall == VERDICT_IO_ERROR
    assert reports[1].overall == VERDICT_PASS
    assert stats.io_errors == 1


def test_stats_match_independent_fold(demo_scene, demo_recipe, tmp_path):
    defect = make_demo_scene(edge_b_deg=82.0)
    paths = []
    for i, img in enumerate([demo_scene, defect, demo_scene]):
        p = tmp_path / f"img{i}.png"
        save(img, p)
        paths.append(p)
    reports, stats = batch_run(demo_recipe, paths)

    # independent fold over the report list
    values = {}
    for r in reports:
        for m in r.measurements:
            if m.value is not None:
                values.setdefault(m.name, []).append(m.value)
    for name, vs in values.items():
        entry = stats.per_measurement[name]
        assert entry["mean"] == pytest.approx(sum(vs) / len(vs))
        assert entry["min"] == min(vs) and entry["max"] == max(vs)
        mean = sum(vs) / len(vs)
        assert entry["stddev"] == pytest.approx((sum((v - mean) ** 2 for v in vs) / len(vs)) ** 0.5)
    assert compute_stats(reports) == stats


def test_batch_parallelism_changes_nothing(demo_scene, demo_recipe, tmp_path):
    defect = make_demo_scene(edge_b_deg=82.0)
    paths = []
    for i, img in enumerate([demo_scene, defect, demo_scene, defect]):
        p = tmp_path / f"img{i}.png"
        save(img, p)
        paths.append(p)
    serial, s1 = batch_run(demo_recipe, paths, jobs=1)
    parallel, s8 = batch_run(demo_recipe, paths, jobs=8)
    assert [report_to_canonical_json(r) for r in serial] == [
        report_to_canonical_json(r) for r in parallel
    ]
    assert s1 == s8
