"""Deterministic synthetic scene and demo recipe.

The scene is a 640x480 textured reference with every feature the demo
recipe measures: a distinctive disc pattern for the registration
template, two straight ramp edges at known angles, a constant-intensity
patch and a dark field with bright squares.  Shapes are rendered with
short linear ramps so warped copies (built by the test-support warper)
preserve subpixel edge positions.

All layout keeps a safety margin so that every tool ROI stays inside the
target for warps up to ~8 degrees, 6% scale and 12 px translation.
"""

from __future__ import annotations

import math

import numpy as np

from .flowchart import FlowGraph, graph_from_dict
from .geometry import Point2, Roi
from .inspection import Recipe, Tolerance
from .raster import Image
from .registration import SearchParams

__all__ = [
    "DEMO_TOLERANCES",
    "make_demo_recipe",
    "make_demo_scene",
    "roi_centered",
]


def roi_centered(cx: float, cy: float, width: float, height: float, theta: float = 0.0) -> Roi:
    """ROI given its center point (origin is the rotated top-left corner)."""
    rad = math.radians(theta)
    c, s = math.cos(rad), math.sin(rad)
    hx, hy = width / 2.0, height / 2.0
    return Roi(
        origin=Point2(cx - (c * hx - s * hy), cy - (s * hx + c * hy)),
        width=width,
        height=height,
        theta=theta,
    )


def _smooth_noise(rng: np.random.Generator, height: int, width: int, radius: int = 3) -> np.ndarray:
    noise = rng.standard_normal((height, width))
    k = 2 * radius + 1
    for _ in range(2):
        for axis in (0, 1):
            pad = [(0, 0), (0, 0)]
            pad[axis] = (radius, radius + 1)
            c = np.cumsum(np.pad(noise, pad, mode="edge"), axis=axis)
            hi = np.take(c, range(k, c.shape[axis]), axis=axis)
            lo = np.take(c, range(0, c.shape[axis] - k), axis=axis)
            noise = (hi - lo) / k
    return noise


def _disc(img: np.ndarray, cx: float, cy: float, r: float, value: float) -> None:
    yy, xx = np.mgrid[0 : img.shape[0], 0 : img.shape[1]]
    dist = np.hypot(xx - cx, yy - cy)
    alpha = np.clip((r - dist) / 1.5 + 0.5, 0.0, 1.0)
    img *= 1.0 - alpha
    img += value * alpha


def _ramp_edge(img: np.ndarray, rect: tuple, px: float, py: float, theta_deg: float, lo: float, hi: float) -> None:
    """Fill ``rect`` with a straight edge through (px, py) along theta."""
    x0, y0, x1, y1 = rect
    yy, xx = np.mgrid[y0:y1, x0:x1]
    rad = math.radians(theta_deg)
    # signed distance from the line; positive side is brightened
    sd = math.cos(rad) * (yy - py) - math.sin(rad) * (xx - px)
    t = np.clip(sd / 2.0 + 0.5, 0.0, 1.0)
    img[y0:y1, x0:x1] = lo + (hi - lo) * t


def _soft_rect(img: np.ndarray, x0: float, y0: float, x1: float, y1: float, value: float) -> None:
    yy, xx = np.mgrid[0 : img.shape[0], 0 : img.shape[1]]
    d = np.maximum.reduce(
        [x0 - xx, xx - x1, y0 - yy, yy - y1]
    )
    alpha = np.clip(0.5 - d, 0.0, 1.0)
    img *= 1.0 - alpha
    img += value * alpha


def make_demo_scene(
    width: int = 640,
    height: int = 480,
    edge_a_deg: float = 30.0,
    edge_b_deg: float = 75.0,
    intensity_level: float = 0.7,
    second_blob: bool = True,
    seed: int = 417,
) -> Image:
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    img = 0.45 + 0.05 * np.sin(xx / 23.0) * np.cos(yy / 31.0) + 0.04 * np.sin((xx + yy) / 53.0)
    img += 0.9 * _smooth_noise(rng, height, width)
    np.clip(img, 0.05, 0.95, out=img)

    # registration anchor pattern inside the template region (80..200)^2
    _disc(img, 115, 120, 22, 0.08)
    _disc(img, 165, 105, 13, 0.92)
    _disc(img, 140, 165, 16, 0.88)
    _disc(img, 178, 172, 9, 0.12)

    # two straight ramp edges for the line tools
    _ramp_edge(img, (200, 80, 340, 220), 270.0, 150.0, edge_a_deg, 0.2, 0.8)
    _ramp_edge(img, (200, 260, 340, 400), 270.0, 330.0, edge_b_deg, 0.2, 0.8)

    # constant-intensity patch
    img[90:170, 360:440] = intensity_level

    # blob field: dark background, bright squares with 1 px soft borders
    img[250:410, 360:540] = 0.12
    _soft_rect(img, 390, 290, 430, 330, 0.95)  # 40x40 -> area ~1600
    if second_blob:
        _soft_rect(img, 470, 350, 500, 380, 0.95)  # 30x30 -> area ~900

    return Image(img)


DEMO_TOLERANCES = (
    Tolerance("angle", 43.0, 47.0),
    Tolerance("dist", 152.0, 160.0),
    Tolerance("bright", 0.65, 0.75),
    Tolerance("blobs_count", 2.0, 2.0),
    Tolerance("blobs_area", 2420.0, 2720.0),
)


def make_demo_graph() -> FlowGraph:
    line_roi_a = roi_centered(270, 150, 60, 100, theta=30.0 + 90.0)
    line_roi_b = roi_centered(270, 330, 60, 100, theta=75.0 + 90.0)
    blocks = [
        {"id": "in", "kind": "input", "display": {"x": 40, "y": 200}},
        {"id": "reg", "kind": "registration", "display": {"x": 160, "y": 200}},
        {
            "id": "line_a",
            "kind": "extract_line",
            "roi": line_roi_a.to_json(),
            "params": {"polarity": "dark_to_light", "num_scanlines": 16},
            "display": {"x": 300, "y": 80},
        },
        {
            "id": "line_b",
            "kind": "extract_line",
            "roi": line_roi_b.to_json(),
            "params": {"polarity": "dark_to_light", "num_scanlines": 16},
            "display": {"x": 300, "y": 180},
        },
        {
            "id": "angle",
            "kind": "measure_angle",
            "params": {"mode": "undirected"},
            "display": {"x": 460, "y": 80},
        },
        {"id": "dist", "kind": "measure_distance", "display": {"x": 460, "y": 180}},
        {
            "id": "bright",
            "kind": "measure_intensity",
            "roi": Roi(Point2(370, 100), 60, 60).to_json(),
            "display": {"x": 300, "y": 280},
        },
        {
            "id": "blobs",
            "kind": "extract_blobs",
            "roi": Roi(Point2(370, 260), 160, 140).to_json(),
            "params": {"threshold": 0.5, "polarity": "bright"},
            "display": {"x": 300, "y": 380},
        },
        {"id": "tol_angle", "kind": "tolerance_check", "params": {"name": "angle"}, "display": {"x": 620, "y": 80}},
        {"id": "tol_dist", "kind": "tolerance_check", "params": {"name": "dist"}, "display": {"x": 620, "y": 160}},
        {"id": "tol_bright", "kind": "tolerance_check", "params": {"name": "bright"}, "display": {"x": 620, "y": 240}},
        {"id": "tol_count", "kind": "tolerance_check", "params": {"name": "blobs_count"}, "display": {"x": 620, "y": 320}},
        {"id": "tol_area", "kind": "tolerance_check", "params": {"name": "blobs_area"}, "display": {"x": 620, "y": 400}},
        {"id": "out", "kind": "output", "display": {"x": 760, "y": 240}},
    ]
    connections = [
        {"from": ["in", "image"], "to": ["reg", "image"]},
        {"from": ["reg", "image"], "to": ["line_a", "image"]},
        {"from": ["reg", "image"], "to": ["line_b", "image"]},
        {"from": ["reg", "image"], "to": ["bright", "image"]},
        {"from": ["reg", "image"], "to": ["blobs", "image"]},
        {"from": ["line_a", "line"], "to": ["angle", "a"]},
        {"from": ["line_b", "line"], "to": ["angle", "b"]},
        {"from": ["line_a", "line"], "to": ["dist", "a"]},
        {"from": ["line_b", "point"], "to": ["dist", "b"]},
        {"from": ["angle", "value"], "to": ["tol_angle", "value"]},
        {"from": ["dist", "value"], "to": ["tol_dist", "value"]},
        {"from": ["bright", "value"], "to": ["tol_bright", "value"]},
        {"from": ["blobs", "count"], "to": ["tol_count", "value"]},
        {"from": ["blobs", "area"], "to": ["tol_area", "value"]},
        {"from": ["tol_angle", "verdict"], "to": ["out", "angle"]},
        {"from": ["tol_dist", "verdict"], "to": ["out", "dist"]},
        {"from": ["tol_bright", "verdict"], "to": ["out", "bright"]},
        {"from": ["tol_count", "verdict"], "to": ["out", "count"]},
        {"from": ["tol_area", "verdict"], "to": ["out", "area"]},
    ]
    return graph_from_dict({"blocks": blocks, "connections": connections})


def make_demo_recipe(source: Image | None = None, recipe_id: str = "demo") -> Recipe:
    return Recipe(
        id=recipe_id,
        source=source if source is not None else make_demo_scene(),
        template_roi=Roi(Point2(80, 80), 120, 120),
        search=SearchParams(),
        graph=make_demo_graph(),
        tolerances=DEMO_TOLERANCES,
    )
