"""Recipes, tolerance evaluation, verdicts and batch execution.

One recipe per product subtype: a reference (source) image, the
registration template and search configuration, the measurement
flowchart, and the tolerance bands.  Tolerance bands are inclusive at
both ends and expressed in source-frame units, which is exactly the
frame the tools report in — so user tolerances defined on the reference
image never need adjusting for a moved, rotated or rescaled part.
"""

from __future__ import annotations

import concurrent.futures
import csv
import io
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import flowchart, overlay, registration as reg
from .flowchart import ExecutionAssets, FlowGraph
from .geometry import Roi, decompose
from .raster import CorruptFile, Image, IoFailure, UnsupportedFormat, load
from .registration import RegistrationFailed, SearchParams
from .tools import Measurement

__all__ = [
    "ConfigError",
    "InspectionReport",
    "MeasurementResult",
    "Recipe",
    "Stats",
    "Tolerance",
    "VERDICT_FAIL",
    "VERDICT_IO_ERROR",
    "VERDICT_PASS",
    "VERDICT_REJECT",
    "batch_run",
    "evaluate",
    "inspect",
    "report_csv_row",
    "report_to_canonical_json",
    "report_to_json",
]

VERDICT_PASS = "PASS"
VERDICT_FAIL = "FAIL"
VERDICT_REJECT = "REJECT-NO-REGISTRATION"
VERDICT_IO_ERROR = "IO-ERROR"


class ConfigError(ValueError):
    """Recipe configuration is inconsistent (dangling names, bad graph)."""


@dataclass(frozen=True)
class Tolerance:
    """Inclusive acceptance band for one named measurement."""

    measurement_name: str
    min: float
    max: float

    def __post_init__(self) -> None:
        if self.min > self.max:
            raise ConfigError(f"tolerance {self.measurement_name!r}: min {self.min} > max {self.max}")

    def contains(self, value: float) -> bool:
        return self.min <= value <= self.max


@dataclass(frozen=True)
class Recipe:
    """A complete inspection definition for one product subtype."""

    id: str
    source: Image
    template_roi: Roi
    search: SearchParams
    graph: FlowGraph
    tolerances: tuple[Tolerance, ...]
    units_per_px: float | None = None
    model: reg.RegistrationModel = field(repr=False, compare=False, default=None)

    def __post_init__(self) -> None:
        diags = flowchart.validate(self.graph)
        if diags:
            raise ConfigError("invalid graph: " + "; ".join(str(d) for d in diags))
        produced = set(self.graph.measurement_names())
        for t in self.tolerances:
            if t.measurement_name not in produced:
                raise ConfigError(
                    f"tolerance references unknown measurement {t.measurement_name!r}; "
                    f"graph produces {sorted(produced)}"
                )
        for b in self.graph.blocks:
            if b.kind == "tolerance_check":
                name = b.params["name"]
                if name not in {t.measurement_name for t in self.tolerances}:
                    raise ConfigError(f"tolerance_check {b.id!r} names {name!r} but no such band exists")
        if self.model is None:
            object.__setattr__(
                self, "model", reg.build_model(self.source, self.template_roi, self.search)
            )

    @property
    def tolerance_map(self) -> dict[str, tuple[float, float]]:
        return {t.measurement_name: (t.min, t.max) for t in self.tolerances}

    def assets(self, stub_identity: bool = False) -> ExecutionAssets:
        return ExecutionAssets(
            model=self.model, tolerances=self.tolerance_map, stub_identity=stub_identity
        )

    # -- serialization ------------------------------------------------------

    def to_dict(self, source_image_name: str = "source.png") -> dict:
        d: dict = {
            "version": 1,
            "id": self.id,
            "source_image": source_image_name,
            "registration": {
                "template_roi": self.template_roi.to_json(),
                "search": self.search.to_json(),
            },
            "graph": flowchart.graph_to_dict(self.graph),
            "tolerances": [
                {"measurement_name": t.measurement_name, "min": t.min, "max": t.max}
                for t in self.tolerances
            ],
        }
        if self.units_per_px is not None:
            d["units_per_px"] = self.units_per_px
        return d

    def to_canonical_json(self, source_image_name: str = "source.png") -> str:
        return json.dumps(self.to_dict(source_image_name), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_dict(cls, obj: dict, source: Image, recipe_id: str | None = None) -> "Recipe":
        if not isinstance(obj, dict):
            raise ConfigError("recipe must be a JSON object")
        if obj.get("version") != 1:
            raise ConfigError(f"unsupported recipe version {obj.get('version')!r}")
        regconf = obj.get("registration")
        if not isinstance(regconf, dict) or "template_roi" not in regconf:
            raise ConfigError("recipe.registration must supply a template_roi")
        try:
            template_roi = Roi.from_json(regconf["template_roi"])
            search = SearchParams.from_json(regconf.get("search", {}))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid registration config: {exc}") from exc
        graph = flowchart.graph_from_dict(obj.get("graph", {}), path="$.graph")
        tolerances = []
        for i, t in enumerate(obj.get("tolerances", [])):
            try:
                tolerances.append(
                    Tolerance(
                        measurement_name=str(t["measurement_name"]),
                        min=float(t["min"]),
                        max=float(t["max"]),
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise ConfigError(f"invalid tolerance entry #{i}: {exc}") from exc
        upp = obj.get("units_per_px")
        return cls(
            id=recipe_id or str(obj.get("id", "recipe")),
            source=source,
            template_roi=template_roi,
            search=search,
            graph=graph,
            tolerances=tuple(tolerances),
            units_per_px=float(upp) if upp is not None else None,
        )

    @classmethod
    def load(cls, path) -> "Recipe":
        """Load recipe JSON; ``source_image`` resolves relative to the file."""
        path = Path(path)
        try:
            obj = json.loads(path.read_text())
        except OSError as exc:
            raise IoFailure(f"cannot read {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
        src_name = obj.get("source_image")
        if not isinstance(src_name, str):
            raise ConfigError(f"{path}: recipe must name its source_image")
        src_path = Path(src_name)
        if not src_path.is_absolute():
            src_path = path.parent / src_path
        source = load(src_path)
        return cls.from_dict(obj, source, recipe_id=str(obj.get("id", path.stem)))


# ---------------------------------------------------------------------------
# Reports.


@dataclass(frozen=True)
class MeasurementResult:
    """One measurement (or tool failure) with its tolerance verdict."""

    name: str
    kind: str
    value: float | None
    verdict: str | None  # PASS/FAIL when toleranced, None otherwise
    tolerance: tuple[float, float] | None = None
    stats: dict | None = None
    error: str | None = None
    block_id: str = ""


@dataclass(frozen=True)
class InspectionReport:
    recipe_id: str
    image_ref: str
    overall: str
    registration_score: float | None
    registration: dict | None  # decomposed T: {tx, ty, theta_deg, scale}
    measurements: tuple[MeasurementResult, ...]
    timing_ms: dict[str, float]
    units_per_px: float | None = None


def evaluate(
    measurements: list[Measurement], tolerances: tuple[Tolerance, ...]
) -> tuple[dict[str, str], str]:
    """Per-measurement verdicts plus the overall verdict.

    A measurement is PASS iff its value lies inside the (inclusive)
    band; overall is PASS iff every toleranced measurement passes.

    Raises:
        ConfigError: a tolerance names a measurement that was not
            produced (recipes catch this at load; direct callers get it
            here).
    """
    by_name = {m.name: m for m in measurements}
    verdicts: dict[str, str] = {}
    overall = VERDICT_PASS
    for t in tolerances:
        if t.measurement_name not in by_name:
            raise ConfigError(f"tolerance references missing measurement {t.measurement_name!r}")
        ok = t.contains(by_name[t.measurement_name].value)
        verdicts[t.measurement_name] = VERDICT_PASS if ok else VERDICT_FAIL
        if not ok:
            overall = VERDICT_FAIL
    return verdicts, overall


def inspect(recipe: Recipe, target: Image, image_ref: str = "<memory>") -> tuple[InspectionReport, list]:
    """Register the target, then run every measurement through the result.

    Registration failure becomes a REJECT-NO-REGISTRATION report, not an
    exception.  Returns the report plus the annotation list (stylable
    overlay input).
    """
    t0 = time.perf_counter()
    try:
        outcome = flowchart.execute(recipe.graph, target, recipe.assets())
    except RegistrationFailed as exc:
        elapsed = (time.perf_counter() - t0) * 1000.0
        report = InspectionReport(
            recipe_id=recipe.id,
            image_ref=image_ref,
            overall=VERDICT_REJECT,
            registration_score=exc.score if exc.score >= -1.0 else None,
            registration=None,
            measurements=(),
            timing_ms={"register": elapsed, "total": elapsed},
            units_per_px=recipe.units_per_px,
        )
        return report, []
    t1 = time.perf_counter()

    produced = [rec.measurement for rec in outcome.measurements]
    verdicts, overall = evaluate(produced, recipe.tolerances)
    if outcome.failures:
        overall = VERDICT_FAIL

    tol_map = recipe.tolerance_map
    results: list[MeasurementResult] = []
    for rec in outcome.measurements:
        m = rec.measurement
        stats = None
        if rec.stats is not None:
            stats = {"min": rec.stats.minimum, "max": rec.stats.maximum}
        results.append(
            MeasurementResult(
                name=m.name,
                kind=m.kind.value,
                value=m.value,
                verdict=verdicts.get(m.name),
                tolerance=tol_map.get(m.name),
                stats=stats,
                block_id=rec.block_id,
            )
        )
    for f in outcome.failures:
        results.append(
            MeasurementResult(
                name=f.block_id,
                kind="error",
                value=None,
                verdict=None,
                error=f"{f.error}: {f.message}",
                block_id=f.block_id,
            )
        )

    annotations = _style_annotations(outcome, verdicts, tol_map)
    tx, ty, theta, scale = decompose(outcome.registration.transform)
    report = InspectionReport(
        recipe_id=recipe.id,
        image_ref=image_ref,
        overall=overall,
        registration_score=outcome.registration.score,
        registration={"tx": tx, "ty": ty, "theta_deg": theta, "scale": scale},
        measurements=tuple(results),
        timing_ms={
            "register_and_execute": (t1 - t0) * 1000.0,
            "total": (time.perf_counter() - t0) * 1000.0,
        },
        units_per_px=recipe.units_per_px,
    )
    return report, annotations


def _style_annotations(outcome, verdicts: dict[str, str], tol_map) -> list[overlay.Annotation]:
    """Color each block's annotations by its toleranced verdict."""
    block_verdict: dict[str, str] = {}
    for rec in outcome.measurements:
        name = rec.measurement.name
        if name in verdicts:
            v = verdicts[name]
            prev = block_verdict.get(rec.block_id)
            if prev != VERDICT_FAIL:  # any failing measurement turns the block red
                block_verdict[rec.block_id] = v
    for f in outcome.failures:
        block_verdict[f.block_id] = VERDICT_FAIL
    styled = []
    for a in outcome.annotations:
        v = block_verdict.get(a.block_id)
        if v == VERDICT_PASS:
            styled.append(a.restyled("pass"))
        elif v == VERDICT_FAIL:
            styled.append(a.restyled("fail"))
        else:
            styled.append(a)
    return styled


# ---------------------------------------------------------------------------
# Report serialization.


def report_to_dict(report: InspectionReport, include_timing: bool = True) -> dict:
    measurements = []
    for m in report.measurements:
        entry: dict = {
            "name": m.name,
            "kind": m.kind,
            "value": m.value,
            "verdict": m.verdict,
            "block_id": m.block_id,
        }
        if m.tolerance is not None:
            entry["tolerance"] = {"min": m.tolerance[0], "max": m.tolerance[1]}
        if m.stats is not None:
            entry["stats"] = m.stats
        if m.error is not None:
            entry["error"] = m.error
        if report.units_per_px is not None and m.value is not None and m.kind == "distance_px":
            entry["value_units"] = m.value * report.units_per_px
        measurements.append(entry)
    d: dict = {
        "recipe_id": report.recipe_id,
        "image": report.image_ref,
        "overall": report.overall,
        "registration": {
            "score": report.registration_score,
            "transform": report.registration,
        },
        "measurements": measurements,
    }
    if report.units_per_px is not None:
        d["units_per_px"] = report.units_per_px
    if include_timing:
        d["timing_ms"] = report.timing_ms
    return d


def report_to_json(report: InspectionReport) -> str:
    """Full report JSON (sorted keys; includes timing)."""
    return json.dumps(report_to_dict(report, include_timing=True), sort_keys=True, indent=2) + "\n"


def report_to_canonical_json(report: InspectionReport) -> str:
    """Canonical form for determinism comparisons: timing excluded."""
    return json.dumps(report_to_dict(report, include_timing=False), sort_keys=True, indent=2) + "\n"


def report_csv_row(report: InspectionReport, tolerance_names: list[str]) -> list[str]:
    values = {m.name: m.value for m in report.measurements if m.value is not None}
    row = [
        report.image_ref,
        report.overall,
        "" if report.registration_score is None else repr(float(report.registration_score)),
    ]
    for name in tolerance_names:
        v = values.get(name)
        row.append("" if v is None else repr(float(v)))
    return row


def reports_to_csv(reports: list[InspectionReport], tolerance_names: list[str]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["image", "verdict", "registration_score", *tolerance_names])
    for r in reports:
        writer.writerow(report_csv_row(r, tolerance_names))
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Batch execution and aggregate statistics.


@dataclass(frozen=True)
class Stats:
    total: int
    passed: int
    failed: int
    rejected: int
    io_errors: int
    per_measurement: dict[str, dict[str, float]]

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "pass": self.passed,
            "fail": self.failed,
            "reject": self.rejected,
            "io_error": self.io_errors,
            "per_measurement": self.per_measurement,
        }


def compute_stats(reports: list[InspectionReport]) -> Stats:
    """Fold a report list into aggregate statistics (pure, re-runnable)."""
    passed = sum(1 for r in reports if r.overall == VERDICT_PASS)
    failed = sum(1 for r in reports if r.overall == VERDICT_FAIL)
    rejected = sum(1 for r in reports if r.overall == VERDICT_REJECT)
    io_errors = sum(1 for r in reports if r.overall == VERDICT_IO_ERROR)
    values: dict[str, list[float]] = {}
    for r in reports:
        for m in r.measurements:
            if m.value is not None:
                values.setdefault(m.name, []).append(m.value)
    per = {}
    for name in sorted(values):
        vs = values[name]
        n = len(vs)
        mean = sum(vs) / n
        # identical samples must report exactly zero spread
        var = 0.0 if min(vs) == max(vs) else sum((v - mean) ** 2 for v in vs) / n
        per[name] = {
            "mean": mean,
            "min": min(vs),
            "max": max(vs),
            "stddev": math.sqrt(var),
            "count": float(n),
        }
    return Stats(
        total=len(reports),
        passed=passed,
        failed=failed,
        rejected=rejected,
        io_errors=io_errors,
        per_measurement=per,
    )


def _io_error_report(recipe: Recipe, ref: str, message: str) -> InspectionReport:
    return InspectionReport(
        recipe_id=recipe.id,
        image_ref=ref,
        overall=VERDICT_IO_ERROR,
        registration_score=None,
        registration=None,
        measurements=(
            MeasurementResult(name="io", kind="error", value=None, verdict=None, error=message),
        ),
        timing_ms={},
        units_per_px=recipe.units_per_px,
    )


def batch_run(recipe: Recipe, paths: list, jobs: int = 1) -> tuple[list[InspectionReport], Stats]:
    """Inspect a list of image files; reports come back in input order.

    Unreadable files yield per-item IO-ERROR reports; the batch
    continues.  ``jobs`` parallelizes across items without changing any
    output byte (results are ordered by index, never by completion).
    """

    def run_one(path) -> InspectionReport:
        ref = str(path)
        try:
            target = load(path)
        except (IoFailure, UnsupportedFormat, CorruptFile) as exc:
            return _io_error_report(recipe, ref, str(exc))
        report, _ = inspect(recipe, target, image_ref=ref)
        return report

    if jobs <= 1 or len(paths) <= 1:
        reports = [run_one(p) for p in paths]
    else:
        with concurrent.futures.ThreadPoolExecutor(max_workers=jobs) as pool:
            reports = list(pool.map(run_one, paths))
    return reports, compute_stats(reports)
