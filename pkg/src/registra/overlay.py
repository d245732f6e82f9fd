"""Non-destructive result display.

Annotations are authored in ROI-local coordinates and carry the display
transform D (local frame to target image) computed by the engine.  The
renderer maps them through D and draws onto a fresh RGB copy of the
grayscale target — the inspected image itself is never touched, and this
copy is the only full-image allocation outside the measurement path.

Rasterization is deliberately minimal and fixed (1 px Bresenham strokes,
built-in 5x7 font) so golden-image tests are stable across platforms.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Union

import numpy as np

from . import counters as _counters
from .font5x7 import GLYPH_HEIGHT, GLYPH_SPACING, GLYPH_WIDTH, glyph
from .geometry import Point2, Roi, Transform, apply
from .raster import Image

__all__ = [
    "Annotation",
    "Label",
    "Marker",
    "Polyline",
    "RoiOutline",
    "Segment",
    "annotations_to_json",
    "label",
    "map_annotation",
    "marker",
    "polyline",
    "render",
    "roi_outline",
    "segment",
]

STYLE_COLORS = {
    "pass": (0, 200, 0),
    "fail": (230, 0, 0),
    "info": (235, 200, 0),
}

MARKER_ARM = 4  # crosshair half-length in px


@dataclass(frozen=True)
class Segment:
    p0: Point2
    p1: Point2


@dataclass(frozen=True)
class Marker:
    p: Point2


@dataclass(frozen=True)
class Polyline:
    points: tuple[Point2, ...]


@dataclass(frozen=True)
class RoiOutline:
    roi: Roi


@dataclass(frozen=True)
class Label:
    text: str
    anchor: Point2


Shape = Union[Segment, Marker, Polyline, RoiOutline, Label]


@dataclass(frozen=True)
class Annotation:
    """A shape in ROI-local coordinates plus its display transform D."""

    shape: Shape
    d: Transform
    style: str = "info"
    block_id: str = ""

    def __post_init__(self) -> None:
        if self.style not in STYLE_COLORS:
            raise ValueError(f"unknown style {self.style!r}")

    def restyled(self, style: str) -> "Annotation":
        return Annotation(shape=self.shape, d=self.d, style=style, block_id=self.block_id)


def segment(p0: Point2, p1: Point2, d: Transform, style: str = "info", block_id: str = "") -> Annotation:
    return Annotation(Segment(p0, p1), d, style, block_id)


def marker(p: Point2, d: Transform, style: str = "info", block_id: str = "") -> Annotation:
    return Annotation(Marker(p), d, style, block_id)


def polyline(points, d: Transform, style: str = "info", block_id: str = "") -> Annotation:
    return Annotation(Polyline(tuple(points)), d, style, block_id)


def roi_outline(roi: Roi, d: Transform, style: str = "info", block_id: str = "") -> Annotation:
    return Annotation(RoiOutline(roi), d, style, block_id)


def label(text: str, anchor: Point2, d: Transform, style: str = "info", block_id: str = "") -> Annotation:
    return Annotation(Label(text, anchor), d, style, block_id)


# ---------------------------------------------------------------------------
# Mapping to the target frame.


def map_annotation(a: Annotation) -> Shape:
    """Replace every coordinate c by ``apply(a.d, c)``; the kind is kept.

    Labels map only their anchor (text is drawn axis-aligned in the
    target, not rotated).
    """
    s = a.shape
    if isinstance(s, Segment):
        return Segment(apply(a.d, s.p0), apply(a.d, s.p1))
    if isinstance(s, Marker):
        return Marker(apply(a.d, s.p))
    if isinstance(s, Polyline):
        return Polyline(tuple(apply(a.d, p) for p in s.points))
    if isinstance(s, RoiOutline):
        corners = [apply(a.d, c) for c in s.roi.corners_local()]
        return Polyline(tuple(corners + [corners[0]]))
    if isinstance(s, Label):
        return Label(s.text, apply(a.d, s.anchor))
    raise TypeError(f"unknown shape {type(s).__name__}")  # pragma: no cover


def annotations_to_json(annotations) -> str:
    """Target-frame annotation list as canonical JSON (for client drawing)."""
    entries = []
    for a in annotations:
        mapped = map_annotation(a)
        entry: dict = {"style": a.style, "block_id": a.block_id}
        if isinstance(mapped, Segment):
            entry["shape"] = "segment"
            entry["points"] = [[mapped.p0.x, mapped.p0.y], [mapped.p1.x, mapped.p1.y]]
        elif isinstance(mapped, Marker):
            entry["shape"] = "marker"
            entry["points"] = [[mapped.p.x, mapped.p.y]]
        elif isinstance(mapped, Polyline):
            entry["shape"] = "polyline"
            entry["points"] = [[p.x, p.y] for p in mapped.points]
        elif isinstance(mapped, Label):
            entry["shape"] = "label"
            entry["points"] = [[mapped.anchor.x, mapped.anchor.y]]
            entry["text"] = mapped.text
        entries.append(entry)
    return json.dumps(entries, sort_keys=True, indent=2) + "\n"


# ---------------------------------------------------------------------------
# Rasterization.


def render(target: Image, annotations) -> np.ndarray:
    """Draw annotations over an RGB copy of the target; returns (H, W, 3) uint8.

    The input image is not modified (its buffer is write-protected); the
    RGB copy is the single permitted full-image allocation.
    """
    _counters.counters.overlay_renders += 1
    gray = target.to_u8()
    rgb = np.repeat(gray[:, :, None], 3, axis=2).copy()
    for a in annotations:
        color = STYLE_COLORS[a.style]
        mapped = map_annotation(a)
        if isinstance(mapped, Segment):
            _draw_line(rgb, mapped.p0, mapped.p1, color)
        elif isinstance(mapped, Marker):
            _draw_marker(rgb, mapped.p, color)
        elif isinstance(mapped, Polyline):
            pts = mapped.points
            for p0, p1 in zip(pts[:-1], pts[1:]):
                _draw_line(rgb, p0, p1, color)
        elif isinstance(mapped, Label):
            _draw_text(rgb, mapped.text, mapped.anchor, color)
    return rgb


def _put(rgb: np.ndarray, x: int, y: int, color) -> None:
    if 0 <= x < rgb.shape[1] and 0 <= y < rgb.shape[0]:
        rgb[y, x] = color


def _draw_line(rgb: np.ndarray, p0: Point2, p1: Point2, color) -> None:
    """Bresenham between the rounded endpoints, clipped per pixel."""
    x0, y0 = int(round(p0.x)), int(round(p0.y))
    x1, y1 = int(round(p1.x)), int(round(p1.y))
    dx = abs(x1 - x0)
    dy = -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    while True:
        _put(rgb, x0, y0, color)
        if x0 == x1 and y0 == y1:
            return
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x0 += sx
        if e2 <= dx:
            err += dx
            y0 += sy


def _draw_marker(rgb: np.ndarray, p: Point2, color) -> None:
    x, y = int(round(p.x)), int(round(p.y))
    for k in range(-MARKER_ARM, MARKER_ARM + 1):
        _put(rgb, x + k, y, color)
        _put(rgb, x, y + k, color)


def _draw_text(rgb: np.ndarray, text: str, anchor: Point2, color) -> None:
    x0, y0 = int(round(anchor.x)), int(round(anchor.y))
    cx = x0
    for ch in text:
        g = glyph(ch)
        for row in range(GLYPH_HEIGHT):
            for col in range(GLYPH_WIDTH):
                if g[row][col]:
                    _put(rgb, cx + col, y0 + row, color)
        cx += GLYPH_WIDTH + GLYPH_SPACING
