"""Grayscale image container, file I/O, point sampling and zero-copy views.

Pixel intensities are float64 in [0, 1]; 8-bit sources are normalized on
load and re-quantized on save so that save/load round-trips 8-bit data
exactly.  Images are immutable after construction (the backing numpy
array is write-protected), so they can be shared freely across
concurrent inspections.

``warp_similarity`` is test support only: it builds synthetic targets
with known ground-truth transforms.  The inspection path never calls it;
the instrumentation counters in :mod:`registra.counters` enforce that.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image as PILImage, UnidentifiedImageError

from . import counters as _counters
from .geometry import Point2, Transform, invert

__all__ = [
    "CorruptFile",
    "Image",
    "ImageView",
    "IoFailure",
    "OutOfBounds",
    "UnsupportedFormat",
    "load",
    "sample_bilinear",
    "save",
    "view",
    "warp_similarity",
]

# Pillow can decode very large files; inspection images are desk-scale.
PILImage.MAX_IMAGE_PIXELS = 64_000_000


class UnsupportedFormat(ValueError):
    """File is not a format this engine reads (PGM, 8-bit PNG)."""


class CorruptFile(ValueError):
    """File claims a supported format but its contents are malformed."""


class IoFailure(OSError):
    """Underlying filesystem read/write failed."""


class OutOfBounds(ValueError):
    """Requested coordinates fall outside the image's sample domain."""


class Image:
    """Immutable grayscale raster with intensities in [0, 1]."""

    __slots__ = ("pixels",)

    def __init__(self, pixels) -> None:
        arr = np.array(pixels, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"image must be a 2D array with positive sides, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("image contains non-finite intensities")
        lo, hi = float(arr.min()), float(arr.max())
        if lo < -1e-9 or hi > 1.0 + 1e-9:
            raise ValueError(f"intensities must lie in [0, 1], got [{lo}, {hi}]")
        np.clip(arr, 0.0, 1.0, out=arr)
        arr.setflags(write=False)
        object.__setattr__(self, "pixels", arr)

    def __setattr__(self, name, value):
        raise AttributeError("Image is immutable")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def to_u8(self) -> np.ndarray:
        """Quantize to uint8 (round-half-up via rint on the 255 grid)."""
        return np.rint(self.pixels * 255.0).astype(np.uint8)

    def checksum(self) -> int:
        """Cheap content hash used by mutation-detection tests."""
        return hash(self.pixels.tobytes())

    def __repr__(self) -> str:
        return f"Image({self.width}x{self.height})"


@dataclass(frozen=True)
class ImageView:
    """Axis-aligned rectangular window aliasing a parent image.

    Creating a view copies no pixel data: ``pixels`` is a numpy slice of
    the parent buffer.
    """

    image: Image
    x: int
    y: int
    width: int
    height: int

    @property
    def pixels(self) -> np.ndarray:
        return self.image.pixels[self.y : self.y + self.height, self.x : self.x + self.width]


def view(img: Image, rect: tuple[int, int, int, int]) -> ImageView:
    """A zero-copy view of ``rect = (x, y, width, height)``.

    Raises:
        OutOfBounds: if the rectangle leaves the image.
    """
    x, y, w, h = (int(v) for v in rect)
    if w < 1 or h < 1:
        raise OutOfBounds(f"view must have positive size, got {w}x{h}")
    if x < 0 or y < 0 or x + w > img.width or y + h > img.height:
        raise OutOfBounds(f"view ({x},{y},{w},{h}) exceeds image {img.width}x{img.height}")
    return ImageView(img, x, y, w, h)


def sample_bilinear(img: Image, p: Point2) -> float:
    """Bilinear intensity at a subpixel position.

    Valid domain is [0, width-1] x [0, height-1]; at integer coordinates
    the result equals the pixel exactly.

    Raises:
        OutOfBounds: if ``p`` lies outside the sample domain.
    """
    x, y = float(p.x), float(p.y)
    w, h = img.width, img.height
    if not (0.0 <= x <= w - 1 and 0.0 <= y <= h - 1):
        raise OutOfBounds(f"sample at ({x}, {y}) outside [0,{w - 1}]x[0,{h - 1}]")
    x0 = min(int(x), w - 2) if w > 1 else 0
    y0 = min(int(y), h - 2) if h > 1 else 0
    fx, fy = x - x0, y - y0
    px = img.pixels
    if w == 1:
        top = px[y0, 0]
        bot = px[min(y0 + 1, h - 1), 0]
        return float(top * (1 - fy) + bot * fy)
    if h == 1:
        return float(px[0, x0] * (1 - fx) + px[0, x0 + 1] * fx)
    v00, v10 = px[y0, x0], px[y0, x0 + 1]
    v01, v11 = px[y0 + 1, x0], px[y0 + 1, x0 + 1]
    return float((v00 * (1 - fx) + v10 * fx) * (1 - fy) + (v01 * (1 - fx) + v11 * fx) * fy)


def sample_bilinear_many(pixels: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Vectorized bilinear sampling on a raw pixel array.

    Same domain rule as :func:`sample_bilinear`; callers must pre-check
    bounds (this is the hot path shared by the measurement tools and the
    registration search).
    """
    h, w = pixels.shape
    x0 = np.clip(np.floor(xs).astype(np.intp), 0, max(w - 2, 0))
    y0 = np.clip(np.floor(ys).astype(np.intp), 0, max(h - 2, 0))
    fx = xs - x0
    fy = ys - y0
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    v00 = pixels[y0, x0]
    v10 = pixels[y0, x1]
    v01 = pixels[y1, x0]
    v11 = pixels[y1, x1]
    return (v00 * (1 - fx) + v10 * fx) * (1 - fy) + (v01 * (1 - fx) + v11 * fx) * fy


# ---------------------------------------------------------------------------
# File I/O: PGM (P2/P5) and 8-bit grayscale PNG; color PNG collapses by
# BT.601 luminance.


def load(path) -> Image:
    """Load a grayscale image from a PGM or PNG file.

    Raises:
        IoFailure: the file cannot be read.
        UnsupportedFormat: the format/bit depth is not supported.
        CorruptFile: the file is malformed.
    """
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    return decode(data, name=str(path))


def decode(data: bytes, name: str = "<bytes>") -> Image:
    """Decode image bytes (PGM or PNG) into an :class:`Image`."""
    if data[:2] in (b"P2", b"P5"):
        return _decode_pgm(data, name)
    if data[:8] == b"\x89PNG\r\n\x1a\n":
        return _decode_png(data, name)
    raise UnsupportedFormat(f"{name}: not a PGM (P2/P5) or PNG file")


def _decode_pgm(data: bytes, name: str) -> Image:
    magic = data[:2]
    tokens: list[bytes] = []
    pos = 2
    # Header: width, height, maxval; '#' starts a comment through end of line.
    while len(tokens) < 3 and pos < len(data):
        c = data[pos : pos + 1]
        if c == b"#":
            nl = data.find(b"\n", pos)
            pos = len(data) if nl < 0 else nl + 1
        elif c.isspace():
            pos += 1
        else:
            end = pos
            while end < len(data) and not data[end : end + 1].isspace() and data[end : end + 1] != b"#":
                end += 1
            tokens.append(data[pos:end])
            pos = end
    if len(tokens) < 3:
        raise CorruptFile(f"{name}: truncated PGM header")
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError as exc:
        raise CorruptFile(f"{name}: non-numeric PGM header") from exc
    if width < 1 or height < 1 or maxval < 1:
        raise CorruptFile(f"{name}: invalid PGM dimensions {width}x{height} maxval {maxval}")
    if maxval > 255:
        raise UnsupportedFormat(f"{name}: {maxval} exceeds 8-bit PGM maxval")
    count = width * height
    if magic == b"P5":
        pos += 1  # single whitespace byte after maxval
        raw = data[pos : pos + count]
        if len(raw) < count:
            raise CorruptFile(f"{name}: PGM pixel data truncated ({len(raw)} of {count} bytes)")
        values = np.frombuffer(raw, dtype=np.uint8).astype(np.float64)
    else:
        try:
            flat = np.array(data[pos:].split()[:count], dtype=np.float64)
        except ValueError as exc:
            raise CorruptFile(f"{name}: non-numeric PGM pixel data") from exc
        if flat.size < count:
            raise CorruptFile(f"{name}: PGM pixel data truncated ({flat.size} of {count} values)")
        values = flat
    if values.max(initial=0.0) > maxval:
        raise CorruptFile(f"{name}: PGM sample exceeds maxval {maxval}")
    return Image((values / maxval).reshape(height, width))


def _decode_png(data: bytes, name: str) -> Image:
    try:
        with PILImage.open(io.BytesIO(data)) as im:
            im.load()
            mode = im.mode
            if mode in ("I", "I;16", "I;16B", "F"):
                raise UnsupportedFormat(f"{name}: 16-bit/float PNG not supported")
            if mode == "L":
                arr = np.asarray(im, dtype=np.float64)
                return Image(arr / 255.0)
            rgb = np.asarray(im.convert("RGB"), dtype=np.float64)
    except UnidentifiedImageError as exc:
        raise CorruptFile(f"{name}: undecodable PNG") from exc
    except (OSError, SyntaxError) as exc:
        raise CorruptFile(f"{name}: {exc}") from exc
    lum = 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]
    return Image(np.clip(lum / 255.0, 0.0, 1.0))


def save(img: Image, path) -> None:
    """Write an image as binary PGM (``.pgm``) or grayscale PNG (``.png``)."""
    path = Path(path)
    suffix = path.suffix.lower()
    u8 = img.to_u8()
    try:
        if suffix == ".pgm":
            header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
            path.write_bytes(header + u8.tobytes())
        elif suffix == ".png":
            PILImage.fromarray(u8, mode="L").save(path, format="PNG")
        else:
            raise UnsupportedFormat(f"cannot write '{suffix}' (use .pgm or .png)")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def save_rgb(rgb: np.ndarray, path) -> None:
    """Write an (H, W, 3) uint8 array as RGB PNG (overlay output)."""
    if rgb.ndim != 3 or rgb.shape[2] != 3 or rgb.dtype != np.uint8:
        raise ValueError(f"expected (H, W, 3) uint8, got {rgb.shape} {rgb.dtype}")
    try:
        PILImage.fromarray(rgb, mode="RGB").save(Path(path), format="PNG")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def encode_rgb_png(rgb: np.ndarray) -> bytes:
    """Encode an (H, W, 3) uint8 array as PNG bytes."""
    buf = io.BytesIO()
    PILImage.fromarray(rgb, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Synthetic-target warper (TEST SUPPORT ONLY — not on the inspection path).


def warp_similarity(img: Image, t: Transform, fill: float = 0.0) -> Image:
    """Resample ``img`` under ``t``: output(p) = img(invert(t) . p).

    Used only to build ground-truth targets for registration and
    placement-invariance tests.  Bumps the instrumentation counters so
    the no-warp contract stays checkable.
    """
    _counters.counters.warp_calls += 1
    _counters.counters.pixel_copies += img.width * img.height
    inv = invert(t).m
    h, w = img.height, img.width
    ys, xs = np.mgrid[0:h, 0:w]
    sx = inv[0, 0] * xs + inv[0, 1] * ys + inv[0, 3]
    sy = inv[1, 0] * xs + inv[1, 1] * ys + inv[1, 3]
    inside = (sx >= 0) & (sx <= w - 1) & (sy >= 0) & (sy <= h - 1)
    out = np.full((h, w), float(fill), dtype=np.float64)
    out[inside] = sample_bilinear_many(img.pixels, sx[inside], sy[inside])
    return Image(out)
