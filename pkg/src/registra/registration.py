"""Recover the source-to-target similarity by normalized cross-correlation.

A distinctive template region of the reference (source) image is matched
against the inspected (target) image over a translation x rotation x
scale grid, coarse-to-fine over a mean-decimation pyramid.  Rotation and
scale hypotheses are realized by re-sampling the *template* from the
source via bilinear point sampling — the target is never warped.  The
integer translation peak of the finest level is refined to subpixel by
1D parabola fits; rotation and scale stay at the finest grid resolution.

The search is deterministic: grids are iterated in a fixed order and the
first strict maximum wins, so identical inputs give bit-identical
results.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Roi, Transform, from_similarity
from .raster import Image, sample_bilinear_many

__all__ = [
    "DimensionMismatch",
    "FlatTemplate",
    "RegistrationFailed",
    "RegistrationModel",
    "RegistrationResult",
    "SearchParams",
    "TemplateOutOfBounds",
    "TemplateTooSmall",
    "ZeroVariance",
    "build_model",
    "ncc",
    "register",
    "register_translation_bruteforce",
]

MIN_TEMPLATE_SIDE = 8


class ZeroVariance(ValueError):
    """NCC is undefined for a constant sequence."""


class FlatTemplate(ValueError):
    """Template region has zero intensity variance."""


class TemplateOutOfBounds(ValueError):
    """Template ROI extends past the source image."""


class TemplateTooSmall(ValueError):
    """Template side is below the minimum usable size."""


class DimensionMismatch(ValueError):
    """Target image is smaller than the template."""


class RegistrationFailed(RuntimeError):
    """Best NCC score fell below ``min_score``.

    Signals a wrong product, an empty nest, or gross misplacement; the
    achieved score is kept for the report.
    """

    def __init__(self, score: float, min_score: float):
        super().__init__(f"registration score {score:.4f} below threshold {min_score:.4f}")
        self.score = float(score)
        self.min_score = float(min_score)


@dataclass(frozen=True)
class SearchParams:
    """Grid and pyramid configuration for the NCC search.

    ``theta_range`` is symmetric (the grid spans +/- the value);
    ``scale_range`` is a (low, high) pair.  The coarse steps define the
    full grid at the coarsest pyramid level, the fine steps the
    resolution reached at the finest level.
    """

    theta_range: float = 10.0
    theta_step: float = 1.0
    theta_fine_step: float = 0.1
    scale_range: tuple[float, float] = (0.9, 1.1)
    scale_step: float = 0.02
    scale_fine_step: float = 0.005
    pyramid_levels: int = 3
    min_score: float = 0.6

    def __post_init__(self) -> None:
        lo, hi = self.scale_range
        if self.theta_range < 0:
            raise ValueError("theta_range must be >= 0")
        if self.theta_step <= 0 or self.theta_fine_step <= 0:
            raise ValueError("theta steps must be positive")
        if not (0 < lo <= hi):
            raise ValueError(f"scale_range must satisfy 0 < low <= high, got {self.scale_range}")
        if self.scale_step <= 0 or self.scale_fine_step <= 0:
            raise ValueError("scale steps must be positive")
        if self.pyramid_levels < 1:
            raise ValueError("pyramid_levels must be >= 1")
        if not (0 < self.min_score <= 1):
            raise ValueError("min_score must be in (0, 1]")
        object.__setattr__(self, "scale_range", (float(lo), float(hi)))

    def to_json(self) -> dict:
        return {
            "theta_range_deg": self.theta_range,
            "theta_step_deg": self.theta_step,
            "theta_fine_step_deg": self.theta_fine_step,
            "scale_range": list(self.scale_range),
            "scale_step": self.scale_step,
            "scale_fine_step": self.scale_fine_step,
            "pyramid_levels": self.pyramid_levels,
            "min_score": self.min_score,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SearchParams":
        defaults = cls()
        sr = obj.get("scale_range", list(defaults.scale_range))
        return cls(
            theta_range=float(obj.get("theta_range_deg", defaults.theta_range)),
            theta_step=float(obj.get("theta_step_deg", defaults.theta_step)),
            theta_fine_step=float(obj.get("theta_fine_step_deg", defaults.theta_fine_step)),
            scale_range=(float(sr[0]), float(sr[1])),
            scale_step=float(obj.get("scale_step", defaults.scale_step)),
            scale_fine_step=float(obj.get("scale_fine_step", defaults.scale_fine_step)),
            pyramid_levels=int(obj.get("pyramid_levels", defaults.pyramid_levels)),
            min_score=float(obj.get("min_score", defaults.min_score)),
        )


@dataclass(frozen=True)
class RegistrationResult:
    """Recovered source-to-target transform and its NCC score."""

    transform: Transform
    score: float


@dataclass(frozen=True)
class RegistrationModel:
    """Prebuilt search state: source pyramid plus coarse template stack.

    Immutable after :func:`build_model`; concurrent :func:`register`
    calls on one model are safe.
    """

    source: Image
    template_roi: Roi
    search: SearchParams
    levels: int
    source_pyramid: tuple[np.ndarray, ...] = field(repr=False)
    coarse_templates: dict = field(repr=False)

    @property
    def template_size(self) -> tuple[int, int]:
        return (int(self.template_roi.width), int(self.template_roi.height))

    @property
    def template_center(self) -> tuple[float, float]:
        tw, th = self.template_size
        return (self.template_roi.origin.x + (tw - 1) / 2.0, self.template_roi.origin.y + (th - 1) / 2.0)


def ncc(a, b) -> float:
    """Normalized cross-correlation of two equal-length sequences.

    Returns a value in [-1, 1]; invariant under affine intensity changes
    of either argument.

    Raises:
        ZeroVariance: if either sequence is constant.
        ValueError: on length mismatch or fewer than 2 samples.
    """
    av = np.asarray(a, dtype=np.float64).ravel()
    bv = np.asarray(b, dtype=np.float64).ravel()
    if av.size != bv.size:
        raise ValueError(f"length mismatch: {av.size} vs {bv.size}")
    if av.size < 2:
        raise ValueError("need at least 2 samples")
    a0 = av - av.mean()
    b0 = bv - bv.mean()
    na = float(np.sqrt(np.dot(a0, a0)))
    nb = float(np.sqrt(np.dot(b0, b0)))
    if na < 1e-12 or nb < 1e-12:
        raise ZeroVariance("constant input sequence")
    return float(np.clip(np.dot(a0, b0) / (na * nb), -1.0, 1.0))


# ---------------------------------------------------------------------------
# Pyramid and level-coordinate bookkeeping.
#
# Level l+1 pixel (i, j) is the mean of the 2x2 block at level l whose
# center sits at level-l coordinate (2i + 0.5, 2j + 0.5), so level-l
# coordinates relate to level-0 by x_l = (x_0 - off_l) / 2^l with
# off_l = (2^l - 1) / 2.


def _decimate(a: np.ndarray) -> np.ndarray:
    h, w = a.shape
    h2, w2 = h // 2, w // 2
    b = a[: 2 * h2, : 2 * w2]
    return 0.25 * (b[0::2, 0::2] + b[1::2, 0::2] + b[0::2, 1::2] + b[1::2, 1::2])


def _build_pyramid(pixels: np.ndarray, levels: int) -> list[np.ndarray]:
    pyr = [pixels]
    for _ in range(1, levels):
        pyr.append(_decimate(pyr[-1]))
    return pyr


def _level_offset(level: int) -> float:
    return (2.0**level - 1.0) / 2.0


def _warped_template(
    src_pixels: np.ndarray,
    center: tuple[float, float],
    tw: int,
    th: int,
    theta: float,
    scale: float,
    anchor: tuple[float, float] = (0.0, 0.0),
) -> np.ndarray:
    """Sample the template under a rotation/scale hypothesis.

    grid(i, j) = source(center + R(-theta) . ((i, j) - grid_center - anchor) / scale)
    so that an axis-aligned target window matches when the hypothesis
    holds; a fractional ``anchor`` shifts the hypothesised match position
    by a subpixel amount without touching the target.  Samples are
    clamped at the source border.
    """
    qcx, qcy = (tw - 1) / 2.0, (th - 1) / 2.0
    jj, ii = np.mgrid[0:th, 0:tw]
    dx = (ii - qcx - anchor[0]) / scale
    dy = (jj - qcy - anchor[1]) / scale
    rad = math.radians(theta)
    ct, st = math.cos(rad), math.sin(rad)
    # R(-theta) . (dx, dy)
    sx = center[0] + ct * dx + st * dy
    sy = center[1] - st * dx + ct * dy
    h, w = src_pixels.shape
    np.clip(sx, 0.0, w - 1.0, out=sx)
    np.clip(sy, 0.0, h - 1.0, out=sy)
    return sample_bilinear_many(src_pixels, sx, sy)


def _fast_len(n: int) -> int:
    """Smallest 5-smooth integer >= n (keeps the FFTs fast)."""
    while True:
        m = n
        for p in (2, 3, 5):
            while m % p == 0:
                m //= p
        if m == 1:
            return n
        n += 1


def _ncc_map(target: np.ndarray, templ: np.ndarray) -> np.ndarray:
    """NCC score at every valid window position, via FFT + integral sums."""
    th_, tw_ = templ.shape
    H, W = target.shape
    t0 = templ - templ.mean()
    nt = float(np.sqrt(np.sum(t0 * t0)))
    out_shape = (H - th_ + 1, W - tw_ + 1)
    if nt < 1e-12:
        return np.full(out_shape, -np.inf)
    s0, s1 = _fast_len(H + th_ - 1), _fast_len(W + tw_ - 1)
    corr = np.fft.irfft2(
        np.fft.rfft2(target, (s0, s1)) * np.fft.rfft2(t0[::-1, ::-1], (s0, s1)), (s0, s1)
    )[th_ - 1 : H, tw_ - 1 : W]
    sums = _window_sums(target, th_, tw_)
    sq_sums = _window_sums(target * target, th_, tw_)
    var = sq_sums - sums * sums / (th_ * tw_)
    np.maximum(var, 0.0, out=var)
    denom = np.sqrt(var) * nt
    score = np.where(denom > 1e-12, corr / np.where(denom > 1e-12, denom, 1.0), -np.inf)
    return np.clip(score, -1.0, 1.0, out=score)


def _window_sums(a: np.ndarray, h: int, w: int) -> np.ndarray:
    c = np.cumsum(np.cumsum(a, axis=0), axis=1)
    c = np.pad(c, ((1, 0), (1, 0)))
    return c[h:, w:] - c[:-h, w:] - c[h:, :-w] + c[:-h, :-w]


def _ncc_window(target: np.ndarray, t0: np.ndarray, nt: float, u: int, v: int) -> float:
    """NCC of the zero-mean template against the window at top-left (u, v)."""
    h, w = t0.shape
    win = target[v : v + h, u : u + w]
    num = float(np.sum(win * t0))  # window mean cancels: sum(t0) == 0
    wm = float(win.mean())
    var = float(np.sum(win * win)) - win.size * wm * wm
    den = math.sqrt(max(var, 0.0)) * nt
    if den < 1e-12:
        return -math.inf
    return max(-1.0, min(1.0, num / den))


# ---------------------------------------------------------------------------
# Model construction.


def build_model(source: Image, template_roi: Roi, search: SearchParams | None = None) -> RegistrationModel:
    """Precompute pyramids and the coarse rotated/scaled template stack.

    Raises:
        TemplateOutOfBounds: template leaves the source image.
        TemplateTooSmall: template side below 8 px.
        FlatTemplate: template intensity variance is zero.
        ValueError: template ROI is not axis-aligned.
    """
    search = search or SearchParams()
    if template_roi.theta != 0.0:
        raise ValueError("template ROI must be axis-aligned (theta == 0)")
    tw, th = int(template_roi.width), int(template_roi.height)
    ox, oy = template_roi.origin.x, template_roi.origin.y
    if tw < MIN_TEMPLATE_SIDE or th < MIN_TEMPLATE_SIDE:
        raise TemplateTooSmall(f"template {tw}x{th} below minimum side {MIN_TEMPLATE_SIDE}")
    if ox < 0 or oy < 0 or ox + tw > source.width or oy + th > source.height:
        raise TemplateOutOfBounds(
            f"template at ({ox}, {oy}) size {tw}x{th} leaves source {source.width}x{source.height}"
        )
    patch = source.pixels[int(oy) : int(oy) + th, int(ox) : int(ox) + tw]
    if float(patch.var()) < 1e-12:
        raise FlatTemplate("template region has no intensity variance")

    levels = search.pyramid_levels
    while levels > 1 and min(tw, th) // 2 ** (levels - 1) < MIN_TEMPLATE_SIDE:
        levels -= 1
    pyramid = _build_pyramid(source.pixels, levels)
    model = RegistrationModel(
        source=source,
        template_roi=template_roi,
        search=search,
        levels=levels,
        source_pyramid=tuple(pyramid),
        coarse_templates={},
    )
    coarse = levels - 1
    model.coarse_templates[coarse] = _coarse_stack(model, coarse)
    return model


def _coarse_thetas(p: SearchParams) -> list[float]:
    n = int(math.floor(p.theta_range / p.theta_step + 1e-9))
    return [k * p.theta_step for k in range(-n, n + 1)]


def _coarse_scales(p: SearchParams) -> list[float]:
    lo, hi = p.scale_range
    n = int(math.floor((hi - lo) / p.scale_step + 1e-9))
    return [lo + k * p.scale_step for k in range(n + 1)]


def _level_geometry(model: RegistrationModel, level: int) -> tuple[tuple[float, float], int, int]:
    tw, th = model.template_size
    f = 2**level
    off = _level_offset(level)
    cx, cy = model.template_center
    return ((cx - off) / f, (cy - off) / f), tw // f, th // f


def _coarse_stack(model: RegistrationModel, level: int) -> list[tuple[float, float, np.ndarray]]:
    """Warped templates for the full coarse (theta, scale) grid."""
    c_l, tw_l, th_l = _level_geometry(model, level)
    src = model.source_pyramid[level]
    stack = []
    for theta in _coarse_thetas(model.search):
        for scale in _coarse_scales(model.search):
            stack.append((theta, scale, _warped_template(src, c_l, tw_l, th_l, theta, scale)))
    return stack


# ---------------------------------------------------------------------------
# The search itself.


@dataclass
class _Candidate:
    score: float
    theta: float
    scale: float
    mx: float  # matched template center, level-0 target coordinates
    my: float


def register(model: RegistrationModel, target: Image) -> RegistrationResult:
    """Find T such that source content at p appears at ``apply(T, p)``.

    Raises:
        DimensionMismatch: target smaller than the template.
        RegistrationFailed: best NCC score below ``search.min_score``.
    """
    search = model.search
    tw, th = model.template_size
    if target.width < tw or target.height < th:
        raise DimensionMismatch(
            f"target {target.width}x{target.height} smaller than template {tw}x{th}"
        )

    levels = model.levels
    target_pyramid = _build_pyramid(target.pixels, levels)
    # A level is usable only while the decimated target still contains the
    # decimated template.
    while levels > 1:
        tgt = target_pyramid[levels - 1]
        _, tw_l, th_l = _level_geometry(model, levels - 1)
        if tgt.shape[0] >= th_l and tgt.shape[1] >= tw_l and min(tw_l, th_l) >= MIN_TEMPLATE_SIDE:
            break
        levels -= 1

    best = _coarse_pass(model, target_pyramid, levels - 1)

    n_stages = max(levels - 1, 1)
    theta_steps = _refine_steps(search.theta_step, search.theta_fine_step, n_stages)
    scale_steps = _refine_steps(search.scale_step, search.scale_fine_step, n_stages)
    theta_grid_fixed = len(_coarse_thetas(search)) == 1
    scale_grid_fixed = len(_coarse_scales(search)) == 1

    prev_theta_step = search.theta_step
    prev_scale_step = search.scale_step
    final = None
    for stage in range(n_stages):
        level = levels - 2 - stage if levels > 1 else 0
        thetas = (
            [best.theta]
            if theta_grid_fixed
            else _refine_values(best.theta, theta_steps[stage], prev_theta_step, -search.theta_range, search.theta_range)
        )
        scales = (
            [best.scale]
            if scale_grid_fixed
            else _refine_values(best.scale, scale_steps[stage], prev_scale_step, *search.scale_range)
        )
        best, final = _refine_pass(model, target_pyramid[level], level, best, thetas, scales)
        prev_theta_step = theta_steps[stage]
        prev_scale_step = scale_steps[stage]

    if final is not None:
        best = _subgrid_polish(model, target_pyramid[0], best, final, search)

    if best.score < search.min_score:
        raise RegistrationFailed(best.score, search.min_score)

    cx, cy = model.template_center
    rad = math.radians(best.theta)
    ct, st = math.cos(rad), math.sin(rad)
    tx = best.mx - best.scale * (ct * cx - st * cy)
    ty = best.my - best.scale * (st * cx + ct * cy)
    return RegistrationResult(
        transform=from_similarity(tx, ty, best.theta, best.scale),
        score=best.score,
    )


def _refine_steps(coarse: float, fine: float, n_stages: int) -> list[float]:
    fine = min(fine, coarse)
    if n_stages == 1:
        return [fine]
    return [coarse ** (1 - r / n_stages) * fine ** (r / n_stages) for r in range(1, n_stages + 1)]


def _refine_values(center: float, step: float, prev_step: float, lo: float, hi: float) -> list[float]:
    k = max(1, int(math.ceil(prev_step / step - 1e-9)))
    vals = []
    for i in range(-k, k + 1):
        v = min(max(center + i * step, lo), hi)
        if not vals or abs(v - vals[-1]) > 1e-12:
            vals.append(v)
    return vals


def _coarse_pass(model: RegistrationModel, target_pyramid: list[np.ndarray], level: int) -> _Candidate:
    stack = model.coarse_templates.get(level)
    if stack is None:
        stack = _coarse_stack(model, level)  # target forced a smaller pyramid
    tgt = target_pyramid[level]
    f = 2**level
    off = _level_offset(level)
    best = _Candidate(score=-math.inf, theta=0.0, scale=1.0, mx=0.0, my=0.0)
    for theta, scale, templ in stack:
        th_l, tw_l = templ.shape
        score_map = _ncc_map(tgt, templ)
        idx = int(np.argmax(score_map))  # first maximum in row-major order
        v, u = divmod(idx, score_map.shape[1])
        s = float(score_map[v, u])
        if s > best.score:
            mx_l = u + (tw_l - 1) / 2.0
            my_l = v + (th_l - 1) / 2.0
            best = _Candidate(s, theta, scale, mx_l * f + off, my_l * f + off)
    if not math.isfinite(best.score):
        raise RegistrationFailed(-1.0, model.search.min_score)
    return best


@dataclass
class _RefineData:
    thetas: list[float]
    scales: list[float]
    us: list[int]
    vs: list[int]
    scores: np.ndarray  # (n_theta, n_scale, n_v, n_u)
    ti: int
    si: int
    j: int
    i: int


def _refine_pass(
    model: RegistrationModel,
    tgt: np.ndarray,
    level: int,
    prior: _Candidate,
    thetas: list[float],
    scales: list[float],
    pad: int = 3,
):
    """Evaluate a (theta, scale) neighborhood over a small translation window.

    The translation window is expanded while the winning peak sits on its
    border, so the later parabola fits always have interior neighbors
    when the target allows it.
    """
    c_l, tw_l, th_l = _level_geometry(model, level)
    src = model.source_pyramid[level]
    f = 2**level
    off = _level_offset(level)
    qcx, qcy = (tw_l - 1) / 2.0, (th_l - 1) / 2.0
    u_pred = (prior.mx - off) / f - qcx
    v_pred = (prior.my - off) / f - qcy
    u_max = tgt.shape[1] - tw_l
    v_max = tgt.shape[0] - th_l

    templates = []
    for theta in thetas:
        for scale in scales:
            w = _warped_template(src, c_l, tw_l, th_l, theta, scale)
            t0 = w - w.mean()
            templates.append((t0, float(np.sqrt(np.sum(t0 * t0)))))

    grow = pad
    for _ in range(8):
        u_lo = max(0, min(int(round(u_pred)) - grow, u_max))
        u_hi = min(u_max, int(round(u_pred)) + grow)
        v_lo = max(0, min(int(round(v_pred)) - grow, v_max))
        v_hi = min(v_max, int(round(v_pred)) + grow)
        us = list(range(u_lo, u_hi + 1))
        vs = list(range(v_lo, v_hi + 1))
        scores = np.full((len(thetas), len(scales), len(vs), len(us)), -np.inf)
        for k, (t0, nt) in enumerate(templates):
            ti, si = divmod(k, len(scales))
            for j, v in enumerate(vs):
                for i, u in enumerate(us):
                    scores[ti, si, j, i] = _ncc_window(tgt, t0, nt, u, v)
        idx = int(np.argmax(scores))  # first maximum in grid order
        ti, rem = divmod(idx, scores.shape[1] * scores.shape[2] * scores.shape[3])
        si, rem = divmod(rem, scores.shape[2] * scores.shape[3])
        j, i = divmod(rem, scores.shape[3])
        peak = float(scores[ti, si, j, i])
        if not math.isfinite(peak):
            raise RegistrationFailed(-1.0, model.search.min_score)
        best = _Candidate(
            peak, thetas[ti], scales[si], (us[i] + qcx) * f + off, (vs[j] + qcy) * f + off
        )
        on_border = (
            (i == 0 and us[0] > 0)
            or (i == len(us) - 1 and us[-1] < u_max)
            or (j == 0 and vs[0] > 0)
            or (j == len(vs) - 1 and vs[-1] < v_max)
        )
        data = _RefineData(thetas, scales, us, vs, scores, ti, si, j, i)
        if not on_border:
            return best, data
        u_pred, v_pred = us[i], vs[j]
        grow += pad
    return best, data


def _parabola_offset(left: float, mid: float, right: float) -> float:
    denom = left - 2.0 * mid + right
    if denom >= -1e-15:  # flat or non-concave: keep the grid peak
        return 0.0
    off = 0.5 * (left - right) / denom
    return max(-0.5, min(0.5, off))


def _axis_parabola(values: list[float], scores_1d: np.ndarray, k: int) -> float:
    """Subgrid estimate along one parameter axis (uniform spacing only)."""
    if not (0 < k < len(values) - 1):
        return values[k]
    left_step = values[k] - values[k - 1]
    right_step = values[k + 1] - values[k]
    if abs(left_step - right_step) > 1e-9 or left_step <= 0:
        return values[k]
    return values[k] + left_step * _parabola_offset(
        float(scores_1d[k - 1]), float(scores_1d[k]), float(scores_1d[k + 1])
    )


def _subgrid_polish(
    model: RegistrationModel,
    tgt0: np.ndarray,
    best: _Candidate,
    data: _RefineData,
    search: SearchParams,
) -> _Candidate:
    """Closed-form subgrid refinement at the finest level.

    Rotation and scale get the same 1D parabola treatment as translation,
    with one twist: their score slices are evaluated with the template
    grid anchored at the *fractional* translation peak (shifting the
    template's source sampling grid, never the target), because at an
    integer window position the subpixel misalignment biases the theta
    and scale estimates.  Without this polish the grid quantization of
    theta/scale leaks into the recovered translation, amplified by the
    template's distance from the origin.
    """
    src0 = model.source_pyramid[0]
    center = model.template_center
    tw, th = model.template_size
    qcx, qcy = (tw - 1) / 2.0, (th - 1) / 2.0
    u_max = tgt0.shape[1] - tw
    v_max = tgt0.shape[0] - th

    def anchored_score(theta: float, scale: float, u: int, v: int, anchor) -> float:
        w = _warped_template(src0, center, tw, th, theta, scale, anchor=anchor)
        t0 = w - w.mean()
        nt = float(np.sqrt(np.sum(t0 * t0)))
        if nt < 1e-12:
            return -math.inf
        return _ncc_window(tgt0, t0, nt, u, v)

    def reanchor(theta: float, scale: float, uc: int, vc: int):
        """Integer argmax near (uc, vc) plus translation parabola."""
        w = _warped_template(src0, center, tw, th, theta, scale)
        t0 = w - w.mean()
        nt = float(np.sqrt(np.sum(t0 * t0)))
        if nt < 1e-12:
            return None
        uc = min(max(uc, 1), max(u_max - 1, 0))
        vc = min(max(vc, 1), max(v_max - 1, 0))
        us = [u for u in range(uc - 2, uc + 3) if 0 <= u <= u_max]
        vs = [v for v in range(vc - 2, vc + 3) if 0 <= v <= v_max]
        grid = np.empty((len(vs), len(us)))
        for j, v in enumerate(vs):
            for i, u in enumerate(us):
                grid[j, i] = _ncc_window(tgt0, t0, nt, u, v)
        idx = int(np.argmax(grid))
        j, i = divmod(idx, grid.shape[1])
        du = dv = 0.0
        if 0 < i < grid.shape[1] - 1:
            du = _parabola_offset(grid[j, i - 1], grid[j, i], grid[j, i + 1])
        if 0 < j < grid.shape[0] - 1:
            dv = _parabola_offset(grid[j - 1, i], grid[j, i], grid[j + 1, i])
        return us[i], vs[j], du, dv, float(grid[j, i])

    theta, scale = best.theta, best.scale
    theta_free = len(data.thetas) > 1
    scale_free = len(data.scales) > 1
    anchor_state = reanchor(theta, scale, data.us[data.i], data.vs[data.j])
    if anchor_state is None:
        return best
    u, v, du, dv, score = anchor_state

    for _ in range(2):  # fixed two rounds: estimates settle well within that
        anchor = (du, dv)
        if theta_free:
            step = search.theta_fine_step
            probes = [
                min(max(theta + k * step, -search.theta_range), search.theta_range) for k in (-1, 0, 1)
            ]
            if probes[0] < probes[1] < probes[2]:
                s3 = np.array([anchored_score(t, scale, u, v, anchor) for t in probes])
                theta = _axis_parabola(probes, s3, 1)
        if scale_free:
            step = search.scale_fine_step
            lo, hi = search.scale_range
            probes = [min(max(scale + k * step, lo), hi) for k in (-1, 0, 1)]
            if probes[0] < probes[1] < probes[2]:
                s3 = np.array([anchored_score(theta, s, u, v, anchor) for s in probes])
                scale = _axis_parabola(probes, s3, 1)
        anchor_state = reanchor(theta, scale, u, v)
        if anchor_state is None:
            break
        u, v, du, dv, score = anchor_state

    final_score = anchored_score(theta, scale, u, v, (du, dv))
    if not math.isfinite(final_score) or final_score < best.score - 1e-9:
        # polish did not help; keep the grid result with plain translation
        # subpixel refinement
        grid = data.scores[data.ti, data.si]
        j, i = data.j, data.i
        du = dv = 0.0
        if 0 < i < grid.shape[1] - 1:
            du = _parabola_offset(grid[j, i - 1], grid[j, i], grid[j, i + 1])
        if 0 < j < grid.shape[0] - 1:
            dv = _parabola_offset(grid[j - 1, i], grid[j, i], grid[j + 1, i])
        return _Candidate(
            best.score, best.theta, best.scale, data.us[i] + du + qcx, data.vs[j] + dv + qcy
        )
    return _Candidate(min(final_score, 1.0), theta, scale, u + du + qcx, v + dv + qcy)


# ---------------------------------------------------------------------------
# Independent oracle: full-resolution exhaustive integer-translation NCC.


def register_translation_bruteforce(model: RegistrationModel, target: Image) -> tuple[int, int, float]:
    """Exhaustive single-level integer-translation NCC argmax.

    Kept deliberately independent of the pyramid path (direct per-window
    statistics, no FFT): it is the acceptance oracle for the fast search.
    Ties break to the smallest (ty, tx).

    Returns ``(tx, ty, score)`` where (tx, ty) is the integer shift of the
    template content.
    """
    tw, th = model.template_size
    if target.width < tw or target.height < th:
        raise DimensionMismatch(
            f"target {target.width}x{target.height} smaller than template {tw}x{th}"
        )
    roi = model.template_roi
    ox, oy = int(roi.origin.x), int(roi.origin.y)
    templ = model.source.pixels[oy : oy + th, ox : ox + tw]
    t0 = templ - templ.mean()
    nt = float(np.sqrt(np.sum(t0 * t0)))
    tgt = target.pixels

    best_score = -math.inf
    best_uv = (0, 0)
    n = th * tw
    for v in range(target.height - th + 1):
        rows = tgt[v : v + th]
        # windows along x for this row band, shape (positions, th, tw)
        wins = np.lib.stride_tricks.sliding_window_view(rows, (th, tw))[0]
        nums = np.einsum("pij,ij->p", wins, t0)
        sums = wins.sum(axis=(1, 2))
        sqs = np.einsum("pij,pij->p", wins, wins)
        var = sqs - sums * sums / n
        np.maximum(var, 0.0, out=var)
        den = np.sqrt(var) * nt
        with np.errstate(divide="ignore", invalid="ignore"):
            scores = np.where(den > 1e-12, nums / np.where(den > 1e-12, den, 1.0), -np.inf)
        u = int(np.argmax(scores))
        s = float(scores[u])
        if s > best_score:  # strict: first (smallest ty, then tx) wins
            best_score = s
            best_uv = (u, v)
    if not math.isfinite(best_score):
        raise RegistrationFailed(-1.0, model.search.min_score)
    u, v = best_uv
    return (u - ox, v - oy, min(1.0, best_score))
