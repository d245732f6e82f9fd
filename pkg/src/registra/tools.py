"""Measurement tools that run in source-defined ROIs mapped onto the target.

Every tool receives a :class:`ToolContext` carrying the recovered
source-to-target transform.  ROIs and parameters are authored on the
reference image; at run time local sample positions are pushed through
``compose(T, roi_to_parent(roi))`` and the *target* is point-sampled at
those positions — no intermediate image is ever materialized.  All
geometric outputs are reported back in the source frame (positions via
``invert(T)``, lengths divided by the recovered scale), so tolerances
defined on the reference image apply unchanged.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .geometry import Point2, Roi, Transform, apply, compose, decompose, invert, roi_to_parent
from .raster import Image, sample_bilinear_many

__all__ = [
    "Blob",
    "DegenerateFit",
    "EdgeParams",
    "InsufficientEdgePoints",
    "IntensityStats",
    "LineModel",
    "Measurement",
    "MeasurementKind",
    "Polarity",
    "RoiOutsideTarget",
    "ToolContext",
    "extract_blobs",
    "extract_line",
    "measure_angle",
    "measure_distance",
    "measure_intensity",
]


class RoiOutsideTarget(ValueError):
    """ROI mapped through T leaves the target's sample domain."""


class InsufficientEdgePoints(ValueError):
    """Fewer than 2 scanlines produced an accepted edge point."""


class DegenerateFit(ValueError):
    """Edge points have no spatial extent; no line is defined."""


class Polarity(str, Enum):
    DARK_TO_LIGHT = "dark_to_light"
    LIGHT_TO_DARK = "light_to_dark"
    ANY = "any"


class MeasurementKind(str, Enum):
    ANGLE_DEG = "angle_deg"
    DISTANCE_PX = "distance_px"
    INTENSITY_MEAN = "intensity_mean"
    BLOB_COUNT = "blob_count"
    BLOB_AREA_PX2 = "blob_area_px2"
    SCORE = "score"


@dataclass(frozen=True)
class ToolContext:
    """Shared per-inspection state injected into every tool block."""

    transform: Transform  # source -> target, from registration
    target: Image
    scale_hint: float = 0.0  # decompose(transform).scale, set in __post_init__

    def __post_init__(self) -> None:
        object.__setattr__(self, "scale_hint", decompose(self.transform)[3])


@dataclass(frozen=True)
class Measurement:
    """A named scalar result, geometric values in source-frame units."""

    name: str
    kind: MeasurementKind
    value: float
    frame: str = "source"

    def __post_init__(self) -> None:
        if not math.isfinite(self.value):
            raise ValueError(f"measurement {self.name!r} has non-finite value {self.value}")


@dataclass(frozen=True)
class LineModel:
    """Total-least-squares line fit in the source frame.

    ``point`` is the centroid of the accepted edge points (the TLS line
    passes through it); ``direction`` is unit length with a canonical
    sign (y > 0, or x > 0 when horizontal).
    """

    point: Point2
    direction: tuple[float, float]
    support: int
    rms_residual: float


@dataclass(frozen=True)
class EdgeParams:
    polarity: Polarity = Polarity.ANY
    min_contrast: float = 0.1
    num_scanlines: int = 16
    smoothing: str = "3tap"  # "3tap" ([1,2,1]/4) or "none"

    def __post_init__(self) -> None:
        if not (0 < self.min_contrast <= 1):
            raise ValueError("min_contrast must be in (0, 1]")
        if self.num_scanlines < 2:
            raise ValueError("num_scanlines must be >= 2")
        if self.smoothing not in ("3tap", "none"):
            raise ValueError(f"unknown smoothing {self.smoothing!r}")


@dataclass(frozen=True)
class IntensityStats:
    mean: float
    minimum: float
    maximum: float


@dataclass(frozen=True)
class Blob:
    area: float  # source-frame px^2
    centroid: Point2  # source frame
    bbox: Roi  # axis-aligned in the target, informational


# ---------------------------------------------------------------------------
# ROI sampling helpers.


def _local_to_target(ctx: ToolContext, roi: Roi) -> Transform:
    return compose(ctx.transform, roi_to_parent(roi))


def _check_roi_inside(ctx: ToolContext, roi: Roi, d: Transform) -> None:
    w, h = ctx.target.width, ctx.target.height
    for corner in roi.corners_local():
        p = apply(d, corner)
        if not (0.0 <= p.x <= w - 1 and 0.0 <= p.y <= h - 1):
            raise RoiOutsideTarget(
                f"mapped ROI corner ({p.x:.1f}, {p.y:.1f}) outside target {w}x{h}"
            )


def _sample_local_grid(ctx: ToolContext, d: Transform, lx: np.ndarray, ly: np.ndarray) -> np.ndarray:
    m = d.m
    tx = m[0, 0] * lx + m[0, 1] * ly + m[0, 3]
    ty = m[1, 0] * lx + m[1, 1] * ly + m[1, 3]
    return sample_bilinear_many(ctx.target.pixels, tx, ty)


# ---------------------------------------------------------------------------
# Edge / line extraction (caliper style).


def extract_line(ctx: ToolContext, roi: Roi, params: EdgeParams | None = None) -> LineModel:
    """Fit a line to edge crossings found along the ROI's local x-axis.

    Casts ``num_scanlines`` profiles (one per local-y offset), locates the
    strongest gradient extremum matching the polarity on each, refines it
    to subpixel by a parabola fit, maps the points to the source frame
    and fits a total-least-squares line.

    Raises:
        RoiOutsideTarget: the mapped ROI leaves the target.
        InsufficientEdgePoints: fewer than 2 profiles yielded an edge.
        DegenerateFit: accepted points are all coincident.
    """
    params = params or EdgeParams()
    d = _local_to_target(ctx, roi)
    _check_roi_inside(ctx, roi, d)

    n_x = int(math.floor(roi.width)) + 1
    if n_x < 5:
        raise InsufficientEdgePoints(f"ROI width {roi.width} too narrow for edge profiles")
    xs = np.arange(n_x, dtype=np.float64)
    ys = (np.arange(params.num_scanlines) + 0.5) * (roi.height / params.num_scanlines)

    to_parent = roi_to_parent(roi)
    pts_local: list[tuple[float, float]] = []
    for y in ys:
        profile = _sample_local_grid(ctx, d, xs, np.full(n_x, y))
        x_edge = _locate_edge(profile, params)
        if x_edge is not None:
            pts_local.append((x_edge, float(y)))
    if len(pts_local) < 2:
        raise InsufficientEdgePoints(
            f"only {len(pts_local)} of {params.num_scanlines} scanlines found an edge"
        )

    pts = np.empty((len(pts_local), 2))
    for k, (x, y) in enumerate(pts_local):
        p = apply(to_parent, Point2(x, y))
        pts[k] = (p.x, p.y)
    return _fit_line_tls(pts)


def _locate_edge(profile: np.ndarray, params: EdgeParams) -> float | None:
    if params.smoothing == "3tap":
        sm = profile.copy()
        sm[1:-1] = (profile[:-2] + 2.0 * profile[1:-1] + profile[2:]) * 0.25
        profile = sm
    grad = np.zeros_like(profile)
    grad[1:-1] = 0.5 * (profile[2:] - profile[:-2])
    if params.polarity is Polarity.DARK_TO_LIGHT:
        signed = grad
    elif params.polarity is Polarity.LIGHT_TO_DARK:
        signed = -grad
    else:
        signed = np.abs(grad)
    interior = signed[1:-1]
    if interior.size == 0:
        return None
    i = int(np.argmax(interior)) + 1
    if signed[i] < params.min_contrast:
        return None
    return i + _peak_offset(signed[i - 1], signed[i], signed[i + 1])


def _peak_offset(left: float, mid: float, right: float) -> float:
    denom = left - 2.0 * mid + right
    if denom >= -1e-15:
        return 0.0
    return max(-0.5, min(0.5, 0.5 * (left - right) / denom))


def _fit_line_tls(pts: np.ndarray) -> LineModel:
    centroid = pts.mean(axis=0)
    centered = pts - centroid
    scatter = centered.T @ centered
    eigvals, eigvecs = np.linalg.eigh(scatter)
    if eigvals[1] < 1e-12:
        raise DegenerateFit("edge points are coincident")
    direction = eigvecs[:, 1]
    if direction[1] < 0 or (abs(direction[1]) < 1e-12 and direction[0] < 0):
        direction = -direction
    rms = math.sqrt(max(float(eigvals[0]), 0.0) / len(pts))
    return LineModel(
        point=Point2(float(centroid[0]), float(centroid[1])),
        direction=(float(direction[0]), float(direction[1])),
        support=len(pts),
        rms_residual=rms,
    )


# ---------------------------------------------------------------------------
# Scalar measurements.


def measure_angle(a: LineModel, b: LineModel, mode: str = "undirected", name: str = "angle") -> Measurement:
    """Angle between two fitted lines in degrees.

    Undirected mode folds into [0, 90]; directed mode gives the angle
    from ``a`` to ``b`` in [0, 180) (lines carry no orientation, so
    directed angles live modulo 180).
    """
    ax, ay = a.direction
    bx, by = b.direction
    dot = ax * bx + ay * by
    if mode == "undirected":
        value = math.degrees(math.acos(min(1.0, abs(dot))))
    elif mode == "directed":
        cross = ax * by - ay * bx
        value = math.degrees(math.atan2(cross, dot)) % 180.0
    else:
        raise ValueError(f"unknown angle mode {mode!r}")
    return Measurement(name=name, kind=MeasurementKind.ANGLE_DEG, value=value)


def measure_distance(a, b: Point2, name: str = "distance") -> Measurement:
    """Point-to-point or point-to-line distance in source-frame pixels.

    ``a`` may be a :class:`Point2` (Euclidean distance to ``b``) or a
    :class:`LineModel` (perpendicular distance from ``b``).  Inputs are
    already source-frame, so no rescaling is applied.
    """
    if isinstance(a, LineModel):
        dx, dy = b.x - a.point.x, b.y - a.point.y
        ux, uy = a.direction
        value = abs(ux * dy - uy * dx)
    elif isinstance(a, Point2):
        value = math.hypot(b.x - a.x, b.y - a.y)
    else:
        raise TypeError(f"distance endpoint must be Point2 or LineModel, got {type(a).__name__}")
    return Measurement(name=name, kind=MeasurementKind.DISTANCE_PX, value=value)


def _roi_grid(roi: Roi) -> tuple[np.ndarray, np.ndarray, int, int]:
    """Integer sample grid at 1 px pitch (source scale) over the ROI.

    Integer local coordinates hit source pixels exactly when T is the
    identity and the ROI origin is integral, so region statistics on the
    reference image are crisp (no half-pixel blending at sharp edges).
    """
    nx = max(1, int(round(roi.width)))
    ny = max(1, int(round(roi.height)))
    lx, ly = np.meshgrid(np.arange(nx, dtype=np.float64), np.arange(ny, dtype=np.float64))
    return lx, ly, nx, ny


def measure_intensity(ctx: ToolContext, roi: Roi, name: str = "intensity") -> tuple[Measurement, IntensityStats]:
    """Mean/min/max of bilinear samples over the ROI's local grid.

    Raises:
        RoiOutsideTarget: the mapped ROI leaves the target.
    """
    d = _local_to_target(ctx, roi)
    _check_roi_inside(ctx, roi, d)
    lx, ly, _, _ = _roi_grid(roi)
    samples = _sample_local_grid(ctx, d, lx.ravel(), ly.ravel())
    stats = IntensityStats(
        mean=float(samples.mean()), minimum=float(samples.min()), maximum=float(samples.max())
    )
    return Measurement(name=name, kind=MeasurementKind.INTENSITY_MEAN, value=stats.mean), stats


# ---------------------------------------------------------------------------
# Blob extraction.
#
# The local grid has 1 px pitch at source scale, so each counted cell
# already represents one source-frame px^2: the raw (target-frame) area
# of a cell is scale_hint^2, and the 1/scale_hint^2 normalization is
# built into the sampling pitch.


def extract_blobs(
    ctx: ToolContext,
    roi: Roi,
    threshold: float = 0.5,
    polarity: str = "bright",
    keep_border: bool = True,
) -> list[Blob]:
    """Threshold the sampled ROI grid and label 8-connected components.

    Components are sorted by descending area, then by (centroid y, x).
    ``keep_border=False`` drops components touching the ROI border.

    Raises:
        RoiOutsideTarget: the mapped ROI leaves the target.
        ValueError: threshold outside (0, 1) or unknown polarity.
    """
    if not (0.0 < threshold < 1.0):
        raise ValueError(f"threshold must be in (0, 1), got {threshold}")
    if polarity not in ("bright", "dark"):
        raise ValueError(f"blob polarity must be 'bright' or 'dark', got {polarity!r}")
    d = _local_to_target(ctx, roi)
    _check_roi_inside(ctx, roi, d)

    lx, ly, nx, ny = _roi_grid(roi)
    samples = _sample_local_grid(ctx, d, lx.ravel(), ly.ravel()).reshape(ny, nx)
    mask = samples >= threshold if polarity == "bright" else samples < threshold

    blobs: list[Blob] = []
    to_parent = roi_to_parent(roi)
    for cells in _label_components(mask):
        rows = cells[:, 0]
        cols = cells[:, 1]
        if not keep_border and (
            rows.min() == 0 or cols.min() == 0 or rows.max() == ny - 1 or cols.max() == nx - 1
        ):
            continue
        # local coordinates of the member samples
        cxs = cols.astype(np.float64)
        cys = rows.astype(np.float64)
        centroid_local = Point2(float(cxs.mean()), float(cys.mean()))
        centroid = apply(to_parent, centroid_local)
        m = d.m
        txs = m[0, 0] * cxs + m[0, 1] * cys + m[0, 3]
        tys = m[1, 0] * cxs + m[1, 1] * cys + m[1, 3]
        cell = ctx.scale_hint  # one local grid cell spans scale_hint target px
        bbox = Roi(
            origin=Point2(float(txs.min()) - cell / 2, float(tys.min()) - cell / 2),
            width=float(txs.max() - txs.min()) + cell,
            height=float(tys.max() - tys.min()) + cell,
            theta=0.0,
        )
        blobs.append(Blob(area=float(len(cells)), centroid=centroid, bbox=bbox))
    blobs.sort(key=lambda b: (-b.area, b.centroid.y, b.centroid.x))
    return blobs


def _label_components(mask: np.ndarray) -> list[np.ndarray]:
    """8-connected components in deterministic row-major discovery order."""
    ny, nx = mask.shape
    labels = np.zeros((ny, nx), dtype=np.int32)
    components: list[np.ndarray] = []
    neighbors = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]
    for r0 in range(ny):
        for c0 in range(nx):
            if not mask[r0, c0] or labels[r0, c0]:
                continue
            label = len(components) + 1
            labels[r0, c0] = label
            queue = deque([(r0, c0)])
            cells = [(r0, c0)]
            while queue:
                r, c = queue.popleft()
                for dr, dc in neighbors:
                    rr, cc = r + dr, c + dc
                    if 0 <= rr < ny and 0 <= cc < nx and mask[rr, cc] and not labels[rr, cc]:
                        labels[rr, cc] = label
                        queue.append((rr, cc))
                        cells.append((rr, cc))
            components.append(np.array(cells, dtype=np.int64))
    return components
