"""Acceptance suite: one test per release criterion.

Each criterion prints a single ``ACCEPTANCE <name>: PASS`` line when it
holds (run with ``pytest tests/test_acceptance.py -v`` to see per-criterion
results even without ``-s``).  End-to-end criteria drive the engine
through the CLI only — no HTTP service or UI involved.
"""

import json
import math
import re
import time

import numpy as np
import pytest
from click.testing import CliRunner

from registra.cli import main as cli_main
from registra.counters import counters, reset as reset_counters
from registra.demo import make_demo_scene
from registra.geometry import (
    Point2,
    Roi,
    apply,
    compose,
    decompose,
    from_similarity,
    roi_to_parent,
)
from registra.inspection import Tolerance, evaluate
from registra.overlay import map_annotation, marker
from registra.raster import Image, load, save, warp_similarity
from registra.registration import SearchParams, build_model, register, register_translation_bruteforce
from registra.tools import _label_components

from conftest import center_warp

_SUITE_T0 = time.perf_counter()
_BUDGET_S = 300.0


def run_cli(*args):
    return CliRunner().invoke(cli_main, [str(a) for a in args])


def announce(capsys, name, detail=""):
    with capsys.disabled():
        print(f"\nACCEPTANCE {name}: PASS {detail}".rstrip())


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    root = tmp_path_factory.mktemp("acceptance")
    result = run_cli("demo", "--out", root)
    assert result.exit_code == 0, result.output
    return root


def random_center_params(rng):
    """Center-pivot warp parameters, decomposed to origin-referenced form."""
    t = center_warp(
        rng.uniform(-8.0, 8.0),
        rng.uniform(0.94, 1.06),
        rng.uniform(-12.0, 12.0),
        rng.uniform(-12.0, 12.0),
    )
    return decompose(t)


def test_registration_recovery(workdir, tmp_path, capsys):
    """20 randomized similarities, noise sigma=0.02: t<=0.5px, theta<=0.5deg,
    s<=0.01, each register call <=2s."""
    rng = np.random.default_rng(2024)
    worst = [0.0, 0.0, 0.0, 0.0]
    slowest = 0.0
    for trial in range(20):
        tx, ty, theta, s = random_center_params(rng)
        out = tmp_path / f"t{trial}.png"
        synth = run_cli(
            "synth", "--image", workdir / "source.png",
            "--tx", tx, "--ty", ty, "--theta", theta, "--scale", s,
            "--noise", 0.02, "--seed", trial, "--fill", 0.3, "--out", out,
        )
        assert synth.exit_code == 0, synth.output
        reg = run_cli("register", "--recipe", workdir / "recipe.json", "--image", out)
        assert reg.exit_code == 0, f"trial {trial}: {reg.output}"
        m = re.search(
            r"tx=(\S+) ty=(\S+) theta=(\S+) scale=(\S+) score=(\S+) elapsed_s=(\S+)", reg.output
        )
        rtx, rty, rtheta, rs, _score, elapsed = map(float, m.groups())
        errs = (abs(rtx - tx), abs(rty - ty), abs(rtheta - theta), abs(rs - s))
        assert errs[0] <= 0.5 and errs[1] <= 0.5, f"trial {trial}: translation error {errs}"
        assert errs[2] <= 0.5, f"trial {trial}: rotation error {errs[2]}"
        assert errs[3] <= 0.01, f"trial {trial}: scale error {errs[3]}"
        assert elapsed <= 2.0, f"trial {trial}: register took {elapsed}s"
        worst = [max(a, b) for a, b in zip(worst, errs)]
        slowest = max(slowest, elapsed)
    announce(
        capsys,
        "registration-recovery",
        f"(worst: tx={worst[0]:.3f}px ty={worst[1]:.3f}px theta={worst[2]:.3f}deg "
        f"s={worst[3]:.4f}, slowest register {slowest:.2f}s)",
    )


def test_placement_invariance_end_to_end(workdir, tmp_path, capsys):
    """Demo recipe on 20 random warps agrees with the reference run:
    angle<=0.5deg, lengths<=0.5px+1%, intensity<=0.02, blob area<=5%."""
    ref_path = tmp_path / "ref.json"
    ref_run = run_cli(
        "inspect", "--recipe", workdir / "recipe.json",
        "--image", workdir / "source.png", "--report", ref_path,
    )
    assert ref_run.exit_code == 0, ref_run.output
    ref = {
        m["name"]: m["value"] for m in json.loads(ref_path.read_text())["measurements"]
    }

    rng = np.random.default_rng(777)
    worst = {"angle": 0.0, "dist": 0.0, "bright": 0.0, "blobs_area": 0.0}
    for trial in range(20):
        tx, ty, theta, s = random_center_params(rng)
        target = tmp_path / f"w{trial}.png"
        synth = run_cli(
            "synth", "--image", workdir / "source.png",
            "--tx", tx, "--ty", ty, "--theta", theta, "--scale", s,
            "--noise", 0.02, "--seed", 1000 + trial, "--fill", 0.3, "--out", target,
        )
        assert synth.exit_code == 0, synth.output
        rep_path = tmp_path / f"w{trial}.json"
        res = run_cli(
            "inspect", "--recipe", workdir / "recipe.json",
            "--image", target, "--report", rep_path,
        )
        assert res.exit_code == 0, f"trial {trial} did not PASS:\n{res.output}"
        got = {m["name"]: m["value"] for m in json.loads(rep_path.read_text())["measurements"]}
        checks = {
            "angle": (abs(got["angle"] - ref["angle"]), 0.5),
            "dist": (abs(got["dist"] - ref["dist"]), 0.5 + 0.01 * ref["dist"]),
            "bright": (abs(got["bright"] - ref["bright"]), 0.02),
            "blobs_area": (abs(got["blobs_area"] - ref["blobs_area"]), 0.05 * ref["blobs_area"]),
        }
        assert got["blobs_count"] == ref["blobs_count"], f"trial {trial}: blob count changed"
        for name, (err, tol) in checks.items():
            assert err <= tol, f"trial {trial}: {name} off by {err} (tol {tol})"
            worst[name] = max(worst[name], err)
    announce(
        capsys,
        "placement-invariance",
        "(worst: " + " ".join(f"{k}={v:.4f}" for k, v in worst.items()) + ")",
    )


def test_no_warp_contract(workdir, tmp_path, capsys):
    """Zero full-image resamples/copies during measurement; the overlay
    render is the only full-image allocation."""
    # build the synthetic targets first: the warper is allowed here
    targets = [workdir / "source.png"]
    rng = np.random.default_rng(11)
    scene = load(workdir / "source.png")
    for i in range(3):
        t = center_warp(rng.uniform(-6, 6), rng.uniform(0.95, 1.05), *rng.uniform(-10, 10, 2))
        p = tmp_path / f"nw{i}.png"
        save(warp_similarity(scene, t, fill=0.3), p)
        targets.append(p)

    reset_counters()
    overlay_path = tmp_path / "ov.png"
    for i, target in enumerate(targets):
        args = [
            "inspect", "--recipe", workdir / "recipe.json", "--image", target,
        ]
        if i == 0:
            args += ["--overlay", overlay_path]
        res = run_cli(*args)
        assert res.exit_code == 0, res.output
    assert counters.warp_calls == 0, "a full-image resample ran during measurement"
    assert counters.pixel_copies == 0, "pixel data was copied during measurement"
    assert counters.overlay_renders == 1, "only the explicit overlay render may allocate"
    announce(capsys, "no-warp-contract", f"({len(targets)} inspections, 1 overlay render)")


def test_oracle_equivalences(capsys):
    """Pyramid NCC == brute-force peak (20x); blob labeling == flood fill
    (100x); composed-D mapping == two-step mapping (1e-9)."""
    # 1. pyramid vs brute-force translation peak
    rng = np.random.default_rng(5)
    noise = rng.standard_normal((128, 160))
    for _ in range(2):
        for axis in (0, 1):
            pad = [(0, 0), (0, 0)]
            pad[axis] = (2, 3)
            c = np.cumsum(np.pad(noise, pad, mode="edge"), axis=axis)
            hi = np.take(c, range(5, c.shape[axis]), axis=axis)
            lo = np.take(c, range(0, c.shape[axis] - 5), axis=axis)
            noise = (hi - lo) / 5
    noise = (noise - noise.min()) / (noise.max() - noise.min())
    img = Image(0.1 + 0.8 * noise)
    model = build_model(
        img,
        Roi(Point2(48, 36), 56, 56),
        SearchParams(theta_range=0.0, scale_range=(1.0, 1.0), min_score=0.3),
    )
    for trial in range(20):
        dx, dy = int(rng.integers(-14, 15)), int(rng.integers(-14, 15))
        target = warp_similarity(img, from_similarity(dx, dy, 0, 1), fill=0.5)
        otx, oty, _ = register_translation_bruteforce(model, target)
        tx, ty, _, _ = decompose(register(model, target).transform)
        assert (round(tx), round(ty)) == (otx, oty), f"trial {trial}"

    # 2. blob labeling vs an independent set-based flood fill
    def flood(mask):
        ny, nx = mask.shape
        seen, comps = set(), set()
        for r in range(ny):
            for c in range(nx):
                if not mask[r, c] or (r, c) in seen:
                    continue
                comp, stack = set(), [(r, c)]
                seen.add((r, c))
                while stack:
                    rr, cc = stack.pop()
                    comp.add((rr, cc))
                    for dr in (-1, 0, 1):
                        for dc in (-1, 0, 1):
                            p = (rr + dr, cc + dc)
                            if (
                                0 <= p[0] < ny
                                and 0 <= p[1] < nx
                                and mask[p]
                                and p not in seen
                            ):
                                seen.add(p)
                                stack.append(p)
                comps.add(frozenset(comp))
        return comps

    for _ in range(100):
        mask = rng.uniform(0, 1, (32, 32)) < 0.35
        got = {frozenset(map(tuple, cells)) for cells in _label_components(mask)}
        assert got == flood(mask)

    # 3. composed-D annotation mapping vs explicit two-step mapping
    for _ in range(100):
        t = from_similarity(*rng.uniform(-30, 30, 2), rng.uniform(-40, 40), rng.uniform(0.5, 2))
        roi = Roi(Point2(*rng.uniform(0, 60, 2)), 12, 9, rng.uniform(-180, 179))
        p = Point2(*rng.uniform(0, 12, 2))
        one = map_annotation(marker(p, compose(t, roi_to_parent(roi)))).p
        two = apply(t, apply(roi_to_parent(roi), p))
        assert abs(one.x - two.x) < 1e-9 and abs(one.y - two.y) < 1e-9
    announce(capsys, "oracle-equivalences", "(registration 20/20, blobs 100/100, D-mapping 100/100)")


def test_transform_algebra_properties(capsys):
    """Group laws, decompose roundtrip, angle preservation, length scaling:
    1000 randomized cases at 1e-9."""
    rng = np.random.default_rng(99)

    def rand_t():
        return from_similarity(
            rng.uniform(-200, 200), rng.uniform(-200, 200), rng.uniform(-180, 180), rng.uniform(0.2, 5)
        )

    for _ in range(1000):
        a, b, c = rand_t(), rand_t(), rand_t()

        # closure + associativity
        ab = compose(a, b)
        assert abs(ab.m[0, 0] - ab.m[1, 1]) < 1e-9 and abs(ab.m[0, 1] + ab.m[1, 0]) < 1e-9
        left = compose(a, compose(b, c)).m
        right = compose(compose(a, b), c).m
        assert np.max(np.abs(left - right)) < 1e-9 * max(1.0, np.max(np.abs(left)))

        # decompose/from_similarity roundtrip
        tx, ty, theta, s = decompose(a)
        again = from_similarity(tx, ty, theta, s)
        assert np.max(np.abs(again.m - a.m)) < 1e-9

        # angle preservation (atan2 form: numerically stable near 0 and 180)
        u = rng.uniform(-1, 1, 2) + np.array([1e-3, 0])
        v = rng.uniform(-1, 1, 2) + np.array([0, 1e-3])
        o = apply(a, Point2(0, 0))
        mu = apply(a, Point2(*u))
        mv = apply(a, Point2(*v))
        muv = np.array([mu.x - o.x, mu.y - o.y]), np.array([mv.x - o.x, mv.y - o.y])
        ang0 = math.atan2(abs(u[0] * v[1] - u[1] * v[0]), float(np.dot(u, v)))
        ang1 = math.atan2(
            abs(muv[0][0] * muv[1][1] - muv[0][1] * muv[1][0]), float(np.dot(muv[0], muv[1]))
        )
        assert abs(ang0 - ang1) < 1e-9

        # length scaling
        p = Point2(*rng.uniform(-100, 100, 2))
        q = Point2(*rng.uniform(-100, 100, 2))
        d0 = math.hypot(p.x - q.x, p.y - q.y)
        tp, tq = apply(a, p), apply(a, q)
        d1 = math.hypot(tp.x - tq.x, tp.y - tq.y)
        assert abs(d1 - s * d0) < 1e-9 * max(1.0, d1)
    announce(capsys, "transform-algebra", "(1000 cases, 1e-9)")


def test_flowchart_criteria(workdir, tmp_path, capsys):
    """Diagnostics, canonical fixpoint, deterministic topo order, and
    --jobs byte-stability."""
    from registra.flowchart import (
        BlockSpec,
        Connection,
        FlowGraph,
        graph_from_dict,
        parse,
        serialize,
        topo_order,
        validate,
    )

    # cycle + missing-registration diagnostics
    cyclic = graph_from_dict(
        {
            "blocks": [
                {"id": "in", "kind": "input"},
                {"id": "reg", "kind": "registration"},
                {"id": "t1", "kind": "tolerance_check", "params": {"name": "x"}},
                {"id": "t2", "kind": "tolerance_check", "params": {"name": "y"}},
                {"id": "out", "kind": "output"},
            ],
            "connections": [
                {"from": ["in", "image"], "to": ["reg", "image"]},
                {"from": ["t1", "verdict"], "to": ["t2", "value"]},
                {"from": ["t2", "verdict"], "to": ["t1", "value"]},
                {"from": ["t1", "verdict"], "to": ["out", "v"]},
            ],
        }
    )
    cycle = [d for d in validate(cyclic) if d.code == "Cycle"]
    assert len(cycle) == 1 and set(cycle[0].blocks) == {"t1", "t2"}
    no_reg = graph_from_dict(
        {"blocks": [{"id": "in", "kind": "input"}, {"id": "out", "kind": "output"}], "connections": []}
    )
    assert any(d.code == "MissingRegistration" for d in validate(no_reg))

    # serialize . parse is a fixpoint on the demo recipe's graph
    recipe_obj = json.loads((workdir / "recipe.json").read_text())
    text = serialize(graph_from_dict(recipe_obj["graph"]))
    assert serialize(parse(text)) == text

    # deterministic topo order vs the edge-set oracle on 100 random DAGs
    rng = np.random.default_rng(41)
    for _ in range(100):
        n = int(rng.integers(3, 24))
        ids = [f"n{i:02d}" for i in range(n)]
        edges = [
            (ids[i], ids[j])
            for i in range(n)
            for j in range(i + 1, n)
            if rng.uniform() < 0.12
        ]
        g = FlowGraph(
            blocks=tuple(BlockSpec(id=i, kind="output", params={}) for i in ids),
            connections=tuple(Connection(a, "x", b, "y") for a, b in edges),
        )
        order = topo_order(g)
        assert order == topo_order(g)  # deterministic
        pos = {b: k for k, b in enumerate(order)}
        for a, b in edges:
            assert pos[a] < pos[b]

    # --jobs parallelism emits identical bytes
    d = tmp_path / "batch"
    d.mkdir()
    scene = make_demo_scene()
    save(scene, d / "a.png")
    save(make_demo_scene(edge_b_deg=82.0), d / "b.png")
    save(scene, d / "c.png")
    out1, out8 = tmp_path / "j1.csv", tmp_path / "j8.csv"
    r1 = run_cli("batch", "--recipe", workdir / "recipe.json", "--dir", d, "--csv", out1, "--jobs", 1)
    r8 = run_cli("batch", "--recipe", workdir / "recipe.json", "--dir", d, "--csv", out8, "--jobs", 8)
    assert r1.exit_code == r8.exit_code == 1
    assert out1.read_bytes() == out8.read_bytes()
    announce(capsys, "flowchart", "(diagnostics, fixpoint, 100 DAGs, --jobs stable)")


def test_verdict_logic_and_exit_codes(workdir, tmp_path, capsys):
    """Inclusive boundaries, PASS monotonicity, REJECT distinct from FAIL,
    exit codes 0/1/2/3/4 each exercised."""
    from registra.tools import Measurement, MeasurementKind

    def m(v):
        return [Measurement(name="x", kind=MeasurementKind.DISTANCE_PX, value=v)]

    assert evaluate(m(44.5), (Tolerance("x", 44.5, 45.5),))[1] == "PASS"
    assert evaluate(m(45.5), (Tolerance("x", 44.5, 45.5),))[1] == "PASS"
    assert evaluate(m(45.51), (Tolerance("x", 44.5, 45.5),))[1] == "FAIL"

    rng = np.random.default_rng(3)
    for _ in range(200):
        v = rng.uniform(-5, 5)
        lo, hi = sorted(rng.uniform(-5, 5, 2))
        base = evaluate(m(v), (Tolerance("x", lo, hi),))[1]
        wide = evaluate(m(v), (Tolerance("x", lo - 1, hi + 1),))[1]
        if base == "PASS":
            assert wide == "PASS"

    # exit codes: 0 pass, 1 fail, 2 reject, 3 config, 4 io
    defect = tmp_path / "defect.png"
    save(make_demo_scene(edge_b_deg=82.0), defect)
    noise_img = tmp_path / "noise.png"
    save(Image(np.random.default_rng(0).uniform(0, 1, (480, 640))), noise_img)
    bad_recipe = tmp_path / "bad.json"
    bad_recipe.write_text("{ not json")

    codes = {
        0: run_cli("inspect", "--recipe", workdir / "recipe.json", "--image", workdir / "source.png"),
        1: run_cli("inspect", "--recipe", workdir / "recipe.json", "--image", defect),
        2: run_cli("inspect", "--recipe", workdir / "recipe.json", "--image", noise_img),
        3: run_cli("validate", "--recipe", bad_recipe),
        4: run_cli("inspect", "--recipe", workdir / "recipe.json", "--image", tmp_path / "nope.png"),
    }
    for expected, result in codes.items():
        assert result.exit_code == expected, f"exit {expected}: got {result.exit_code}\n{result.output}"

    # REJECT-NO-REGISTRATION is reported distinctly from FAIL
    assert "REJECT-NO-REGISTRATION" in codes[2].output
    assert "REJECT" not in codes[1].output
    announce(capsys, "verdict-logic", "(boundaries, monotonicity, exit codes 0-4)")


def test_suite_runs_via_cli_under_budget(capsys):
    """The whole acceptance module used the CLI for its end-to-end paths
    and stays inside the 5-minute budget."""
    elapsed = time.perf_counter() - _SUITE_T0
    assert elapsed < _BUDGET_S, f"acceptance suite took {elapsed:.0f}s"
    announce(capsys, "cli-only-budget", f"({elapsed:.0f}s of {_BUDGET_S:.0f}s budget)")
