"""Planar similarity transforms stored as 4x4 homogeneous matrices.

The engine works in raster coordinates: origin at the top-left pixel,
x to the right, y down, angles in degrees with positive rotation turning
the x-axis toward the y-axis.  Every mapping transform (the global
source-to-target transform recovered by registration as well as the
per-ROI display transforms) is a value of :class:`Transform`: a full 4x4
matrix whose upper-left 2x2 block is ``scale * R(theta)``, constrained so
that only translation, rotation and uniform scale are representable.

Composition convention: ``compose(A, B)`` applies ``B`` first, then ``A``
(matrix product ``A @ B``).  All call sites in the engine follow this.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "NonPositiveScale",
    "Point2",
    "Roi",
    "Transform",
    "apply",
    "compose",
    "decompose",
    "from_similarity",
    "identity",
    "invert",
    "roi_to_parent",
]

_SIMILARITY_TOL = 1e-9


class NonPositiveScale(ValueError):
    """Raised when a similarity is requested with scale <= 0."""


def _normalize_degrees(theta: float) -> float:
    """Fold an angle into [-180, 180)."""
    return (float(theta) + 180.0) % 360.0 - 180.0


@dataclass(frozen=True)
class Point2:
    """A 2D point in pixel units (x right, y down)."""

    x: float
    y: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"point coordinates must be finite, got ({self.x}, {self.y})")
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))


@dataclass(frozen=True)
class Roi:
    """Rotated rectangle with its own local coordinate frame.

    ``origin`` is the ROI-local (0, 0) expressed in the parent frame;
    ``theta`` (degrees) rotates the local x-axis relative to the parent
    x-axis.  Local coordinates run x in [0, width], y in [0, height].
    """

    origin: Point2
    width: float
    height: float
    theta: float = 0.0

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"roi sides must be positive, got {self.width}x{self.height}")
        object.__setattr__(self, "width", float(self.width))
        object.__setattr__(self, "height", float(self.height))
        object.__setattr__(self, "theta", _normalize_degrees(self.theta))

    def corners_local(self) -> list[Point2]:
        """The four local-frame corners, counter-clockwise from (0, 0)."""
        w, h = self.width, self.height
        return [Point2(0.0, 0.0), Point2(w, 0.0), Point2(w, h), Point2(0.0, h)]

    def to_json(self) -> dict:
        return {
            "origin": [self.origin.x, self.origin.y],
            "width": self.width,
            "height": self.height,
            "theta_deg": self.theta,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Roi":
        ox, oy = obj["origin"]
        return cls(
            origin=Point2(float(ox), float(oy)),
            width=float(obj["width"]),
            height=float(obj["height"]),
            theta=float(obj.get("theta_deg", 0.0)),
        )


class Transform:
    """A planar similarity embedded in a 4x4 homogeneous matrix.

    Invariants enforced at construction:

    * bottom row is exactly (0, 0, 0, 1) and the third row/column equal
      the identity's (the planar embedding);
    * the upper-left 2x2 block is ``s * R(theta)`` with ``s > 0``
      (``m00 == m11`` and ``m01 == -m10`` within 1e-9).

    Instances are immutable; use the module-level functions
    (:func:`compose`, :func:`invert`, ...) to derive new transforms.
    """

    __slots__ = ("m",)

    def __init__(self, m) -> None:
        arr = np.array(m, dtype=np.float64)
        if arr.shape != (4, 4):
            raise ValueError(f"transform matrix must be 4x4, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("transform matrix contains non-finite entries")
        if not (
            np.array_equal(arr[3], [0.0, 0.0, 0.0, 1.0])
            and np.array_equal(arr[2], [0.0, 0.0, 1.0, 0.0])
            and np.array_equal(arr[:, 2], [0.0, 0.0, 1.0, 0.0])
        ):
            raise ValueError("transform is not a planar embedding (third row/col, bottom row)")
        if abs(arr[0, 0] - arr[1, 1]) > _SIMILARITY_TOL or abs(arr[0, 1] + arr[1, 0]) > _SIMILARITY_TOL:
            raise ValueError("upper-left block is not scale*rotation")
        if arr[0, 0] ** 2 + arr[1, 0] ** 2 <= 0.0:
            raise NonPositiveScale("similarity has zero scale")
        arr.setflags(write=False)
        object.__setattr__(self, "m", arr)

    def __setattr__(self, name, value):  # immutability guard
        raise AttributeError("Transform is immutable")

    def __repr__(self) -> str:
        tx, ty, theta, s = decompose(self)
        return f"Transform(tx={tx:.6g}, ty={ty:.6g}, theta={theta:.6g}, scale={s:.6g})"

    def __matmul__(self, other: "Transform") -> "Transform":
        return compose(self, other)

    def __eq__(self, other) -> bool:
        return isinstance(other, Transform) and np.array_equal(self.m, other.m)

    def __hash__(self) -> int:
        return hash(self.m.tobytes())

    def to_json(self) -> list[float]:
        """Row-major 16-element list (the on-disk encoding)."""
        return [float(v) for v in self.m.reshape(-1)]

    @classmethod
    def from_json(cls, values) -> "Transform":
        arr = np.asarray(values, dtype=np.float64)
        if arr.size != 16:
            raise ValueError(f"transform encoding must have 16 elements, got {arr.size}")
        return cls(arr.reshape(4, 4))


def identity() -> Transform:
    """The 4x4 identity transform."""
    return Transform(np.eye(4))


def from_similarity(tx: float, ty: float, theta: float, scale: float) -> Transform:
    """Build a similarity from translation (px), rotation (degrees) and scale.

    Raises:
        NonPositiveScale: if ``scale <= 0``.
    """
    if not scale > 0:
        raise NonPositiveScale(f"scale must be positive, got {scale}")
    rad = math.radians(theta)
    c, s = math.cos(rad), math.sin(rad)
    m = np.eye(4)
    m[0, 0] = scale * c
    m[0, 1] = -scale * s
    m[1, 0] = scale * s
    m[1, 1] = scale * c
    m[0, 3] = tx
    m[1, 3] = ty
    return Transform(m)


def compose(a: Transform, b: Transform) -> Transform:
    """Return ``a @ b``: the transform applying ``b`` first, then ``a``."""
    return Transform(a.m @ b.m)


def invert(t: Transform) -> Transform:
    """Analytic inverse of a similarity (s -> 1/s, theta -> -theta)."""
    tx, ty, theta, scale = decompose(t)
    rad = math.radians(-theta)
    c, s = math.cos(rad), math.sin(rad)
    inv_s = 1.0 / scale
    # t' = -R(-theta) t / s
    nx = -(c * tx - s * ty) * inv_s
    ny = -(s * tx + c * ty) * inv_s
    return from_similarity(nx, ny, -theta, inv_s)


def apply(t: Transform, p: Point2) -> Point2:
    """Map a point: (x', y', _, _) = T . (x, y, 0, 1)."""
    m = t.m
    x = m[0, 0] * p.x + m[0, 1] * p.y + m[0, 3]
    y = m[1, 0] * p.x + m[1, 1] * p.y + m[1, 3]
    return Point2(x, y)


def decompose(t: Transform) -> tuple[float, float, float, float]:
    """Recover ``(tx, ty, theta_deg, scale)`` with theta in [-180, 180)."""
    m = t.m
    scale = math.hypot(m[0, 0], m[1, 0])
    theta = _normalize_degrees(math.degrees(math.atan2(m[1, 0], m[0, 0])))
    return (float(m[0, 3]), float(m[1, 3]), theta, scale)


def roi_to_parent(roi: Roi) -> Transform:
    """Transform mapping ROI-local coordinates into the parent frame."""
    return from_similarity(roi.origin.x, roi.origin.y, roi.theta, 1.0)
