"""Typed block-graph model of an inspection pipeline.

A flowchart is a DAG of blocks with explicit, type-checked data ports.
The registration transform T and the per-ROI display transforms D are
*context*, not data: they never appear in the serialized connection
list.  The engine injects a :class:`~registra.tools.ToolContext` into
every tool block and assigns each ROI-bearing block its display
transform ``D = compose(T, roi_to_parent(roi))``, which it attaches to
every annotation the block emits.

Execution order is the deterministic topological order (ties broken by
block id), so identical inputs always produce identical outputs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

from . import overlay, registration as reg, tools
from .geometry import Point2, Roi, Transform, apply, compose, identity, invert, roi_to_parent
from .raster import Image

__all__ = [
    "BlockSpec",
    "Connection",
    "CyclicGraph",
    "Diagnostic",
    "DuplicateId",
    "ExecutionAssets",
    "ExecutionOutcome",
    "FlowGraph",
    "MeasurementRecord",
    "SchemaError",
    "ToolFailure",
    "UnknownKind",
    "execute",
    "parse",
    "serialize",
    "topo_order",
    "validate",
]

PORT_TYPES = ("image", "transform", "line", "point", "scalar", "blob_list", "verdict")
# "transform" is reserved for the auto-wired context ports; it is never
# declared on any block and never occurs in a serialized connection.


class SchemaError(ValueError):
    """Graph JSON violates the schema; ``path`` locates the offender."""

    def __init__(self, path: str, reason: str):
        super().__init__(f"{path}: {reason}")
        self.path = path
        self.reason = reason


class DuplicateId(SchemaError):
    def __init__(self, path: str, block_id: str):
        super().__init__(path, f"duplicate block id {block_id!r}")


class UnknownKind(SchemaError):
    def __init__(self, path: str, kind: str):
        super().__init__(path, f"unknown block kind {kind!r}")


class CyclicGraph(ValueError):
    """Raised by :func:`topo_order` when the graph has a cycle."""


# ---------------------------------------------------------------------------
# Block kind catalog: ports, parameters, ROI requirement.


@dataclass(frozen=True)
class _Param:
    name: str
    type: type
    default: Any = None
    required: bool = False
    choices: tuple | None = None
    lo: float | None = None
    hi: float | None = None


@dataclass(frozen=True)
class _KindSpec:
    inputs: dict[str, frozenset]
    outputs: dict[str, str]
    needs_roi: bool
    params: tuple[_Param, ...]
    variadic_sink: bool = False


def _k(inputs, outputs, needs_roi=False, params=(), variadic_sink=False) -> _KindSpec:
    return _KindSpec(
        inputs={p: frozenset(t) for p, t in inputs.items()},
        outputs=dict(outputs),
        needs_roi=needs_roi,
        params=tuple(params),
        variadic_sink=variadic_sink,
    )


_NAME = _Param("name", str, default=None)

KIND_SPECS: dict[str, _KindSpec] = {
    "input": _k({}, {"image": "image"}),
    "registration": _k({"image": {"image"}}, {"image": "image"}),
    "extract_line": _k(
        {"image": {"image"}},
        {"line": "line", "point": "point"},
        needs_roi=True,
        params=(
            _NAME,
            _Param("polarity", str, default="any", choices=("dark_to_light", "light_to_dark", "any")),
            _Param("min_contrast", float, default=0.1, lo=0.0, hi=1.0),
            _Param("num_scanlines", int, default=16, lo=2),
            _Param("smoothing", str, default="3tap", choices=("3tap", "none")),
        ),
    ),
    "measure_angle": _k(
        {"a": {"line"}, "b": {"line"}},
        {"value": "scalar"},
        params=(_NAME, _Param("mode", str, default="undirected", choices=("undirected", "directed"))),
    ),
    "measure_distance": _k(
        {"a": {"line", "point"}, "b": {"line", "point"}},
        {"value": "scalar"},
        params=(_NAME,),
    ),
    "measure_intensity": _k(
        {"image": {"image"}},
        {"value": "scalar"},
        needs_roi=True,
        params=(_NAME,),
    ),
    "extract_blobs": _k(
        {"image": {"image"}},
        {"blobs": "blob_list", "count": "scalar", "area": "scalar"},
        needs_roi=True,
        params=(
            _NAME,
            _Param("threshold", float, default=0.5, lo=0.0, hi=1.0),
            _Param("polarity", str, default="bright", choices=("bright", "dark")),
            _Param("keep_border", bool, default=True),
        ),
    ),
    "tolerance_check": _k(
        {"value": {"scalar"}},
        {"verdict": "verdict"},
        params=(_Param("name", str, required=True),),
    ),
    "output": _k({}, {}, variadic_sink=True),
}


@dataclass(frozen=True)
class BlockSpec:
    """One flowchart block: id, kind, normalized params, optional ROI."""

    id: str
    kind: str
    params: dict
    roi: Roi | None = None
    display: tuple[float, float] | None = None

    def measurement_names(self) -> list[str]:
        """Names of the measurements this block will emit."""
        base = self.params.get("name") or self.id
        if self.kind in ("measure_angle", "measure_distance", "measure_intensity"):
            return [base]
        if self.kind == "extract_blobs":
            return [f"{base}_count", f"{base}_area"]
        if self.kind == "registration":
            return [base]
        return []


@dataclass(frozen=True)
class Connection:
    from_block: str
    from_port: str
    to_block: str
    to_port: str

    def key(self) -> tuple[str, str, str, str]:
        return (self.from_block, self.from_port, self.to_block, self.to_port)


@dataclass(frozen=True)
class FlowGraph:
    blocks: tuple[BlockSpec, ...]
    connections: tuple[Connection, ...]
    by_id: dict[str, BlockSpec] = field(repr=False, hash=False, compare=False, default=None)

    def __post_init__(self) -> None:
        object.__setattr__(self, "by_id", {b.id: b for b in self.blocks})

    def measurement_names(self) -> list[str]:
        names: list[str] = []
        for block_id in topo_order(self):
            names.extend(self.by_id[block_id].measurement_names())
        return names


@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str
    blocks: tuple[str, ...] = ()

    def __str__(self) -> str:
        where = f" [{', '.join(self.blocks)}]" if self.blocks else ""
        return f"{self.code}: {self.message}{where}"


# ---------------------------------------------------------------------------
# Parse / serialize.


def parse(text: str) -> FlowGraph:
    """Parse graph JSON; schema violations raise path-qualified errors."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError("$", f"invalid JSON: {exc}") from exc
    return graph_from_dict(obj)


def graph_from_dict(obj, path: str = "$") -> FlowGraph:
    if not isinstance(obj, dict):
        raise SchemaError(path, "graph must be an object")
    raw_blocks = obj.get("blocks")
    if not isinstance(raw_blocks, list):
        raise SchemaError(f"{path}.blocks", "expected a list of blocks")
    blocks: list[BlockSpec] = []
    seen: set[str] = set()
    for i, rb in enumerate(raw_blocks):
        b = _block_from_dict(rb, f"{path}.blocks[{i}]")
        if b.id in seen:
            raise DuplicateId(f"{path}.blocks[{i}].id", b.id)
        seen.add(b.id)
        blocks.append(b)
    raw_conns = obj.get("connections", [])
    if not isinstance(raw_conns, list):
        raise SchemaError(f"{path}.connections", "expected a list of connections")
    by_id = {b.id: b for b in blocks}
    conns = [
        _connection_from_dict(rc, by_id, f"{path}.connections[{i}]") for i, rc in enumerate(raw_conns)
    ]
    return FlowGraph(blocks=tuple(blocks), connections=tuple(conns))


def _block_from_dict(obj, path: str) -> BlockSpec:
    if not isinstance(obj, dict):
        raise SchemaError(path, "block must be an object")
    block_id = obj.get("id")
    if not isinstance(block_id, str) or not block_id:
        raise SchemaError(f"{path}.id", "block id must be a non-empty string")
    kind = obj.get("kind")
    if kind not in KIND_SPECS:
        raise UnknownKind(f"{path}.kind", str(kind))
    spec = KIND_SPECS[kind]
    params = _params_from_dict(obj.get("params", {}), spec, f"{path}.params")
    roi = None
    if spec.needs_roi:
        if "roi" not in obj:
            raise SchemaError(f"{path}.roi", f"kind {kind!r} requires an roi")
        try:
            roi = Roi.from_json(obj["roi"])
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"{path}.roi", f"invalid roi: {exc}") from exc
    elif "roi" in obj and obj["roi"] is not None:
        raise SchemaError(f"{path}.roi", f"kind {kind!r} does not take an roi")
    display = None
    if "display" in obj and obj["display"] is not None:
        d = obj["display"]
        try:
            display = (float(d["x"]), float(d["y"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"{path}.display", "display must be {x, y}") from exc
    return BlockSpec(id=block_id, kind=kind, params=params, roi=roi, display=display)


def _params_from_dict(obj, spec: _KindSpec, path: str) -> dict:
    if not isinstance(obj, dict):
        raise SchemaError(path, "params must be an object")
    known = {p.name: p for p in spec.params}
    for key in obj:
        if key not in known:
            raise SchemaError(f"{path}.{key}", "unknown parameter")
    out: dict[str, Any] = {}
    for p in spec.params:
        if p.name not in obj or obj[p.name] is None:
            if p.required:
                raise SchemaError(f"{path}.{p.name}", "required parameter missing")
            out[p.name] = p.default
            continue
        v = obj[p.name]
        ppath = f"{path}.{p.name}"
        if p.type is bool:
            if not isinstance(v, bool):
                raise SchemaError(ppath, f"expected boolean, got {type(v).__name__}")
        elif p.type is int:
            if not isinstance(v, int) or isinstance(v, bool):
                raise SchemaError(ppath, f"expected integer, got {type(v).__name__}")
        elif p.type is float:
            if not isinstance(v, (int, float)) or isinstance(v, bool):
                raise SchemaError(ppath, f"expected number, got {type(v).__name__}")
            v = float(v)
        elif p.type is str:
            if not isinstance(v, str):
                raise SchemaError(ppath, f"expected string, got {type(v).__name__}")
        if p.choices is not None and v not in p.choices:
            raise SchemaError(ppath, f"must be one of {list(p.choices)}, got {v!r}")
        if p.lo is not None and v < p.lo:
            raise SchemaError(ppath, f"must be >= {p.lo}, got {v}")
        if p.hi is not None and v > p.hi:
            raise SchemaError(ppath, f"must be <= {p.hi}, got {v}")
        out[p.name] = v
    return out


def _connection_from_dict(obj, by_id: dict[str, BlockSpec], path: str) -> Connection:
    if not isinstance(obj, dict) or "from" not in obj or "to" not in obj:
        raise SchemaError(path, "connection must be {from: [block, port], to: [block, port]}")
    try:
        fb, fp = obj["from"]
        tb, tp = obj["to"]
    except (TypeError, ValueError) as exc:
        raise SchemaError(path, "endpoints must be [block, port] pairs") from exc
    for label, bid in (("from", fb), ("to", tb)):
        if bid not in by_id:
            raise SchemaError(f"{path}.{label}", f"unknown block {bid!r}")
    src = by_id[fb]
    if fp not in KIND_SPECS[src.kind].outputs:
        raise SchemaError(f"{path}.from", f"block {fb!r} ({src.kind}) has no output port {fp!r}")
    dst = by_id[tb]
    dst_spec = KIND_SPECS[dst.kind]
    if not dst_spec.variadic_sink and tp not in dst_spec.inputs:
        raise SchemaError(f"{path}.to", f"block {tb!r} ({dst.kind}) has no input port {tp!r}")
    return Connection(from_block=fb, from_port=fp, to_block=tb, to_port=tp)


def serialize(g: FlowGraph) -> str:
    """Canonical graph JSON: sorted blocks/connections/keys, 2-space indent."""
    return json.dumps(graph_to_dict(g), sort_keys=True, indent=2) + "\n"


def graph_to_dict(g: FlowGraph) -> dict:
    blocks = []
    for b in sorted(g.blocks, key=lambda b: b.id):
        entry: dict[str, Any] = {"id": b.id, "kind": b.kind, "params": dict(b.params)}
        if b.roi is not None:
            entry["roi"] = b.roi.to_json()
        if b.display is not None:
            entry["display"] = {"x": b.display[0], "y": b.display[1]}
        blocks.append(entry)
    conns = [
        {"from": [c.from_block, c.from_port], "to": [c.to_block, c.to_port]}
        for c in sorted(g.connections, key=lambda c: c.key())
    ]
    return {"blocks": blocks, "connections": conns}


# ---------------------------------------------------------------------------
# Validation.


def validate(g: FlowGraph) -> list[Diagnostic]:
    """Check all graph invariants; an empty list means the graph is runnable."""
    diags: list[Diagnostic] = []
    inputs = [b for b in g.blocks if b.kind == "input"]
    regs = [b for b in g.blocks if b.kind == "registration"]
    outputs = [b for b in g.blocks if b.kind == "output"]
    if len(inputs) != 1:
        diags.append(
            Diagnostic(
                "MissingInput" if not inputs else "MultipleInput",
                f"graph must have exactly one input block, found {len(inputs)}",
                tuple(b.id for b in inputs),
            )
        )
    if len(regs) != 1:
        diags.append(
            Diagnostic(
                "MissingRegistration" if not regs else "MultipleRegistration",
                f"graph must have exactly one registration block, found {len(regs)}",
                tuple(b.id for b in regs),
            )
        )
    if not outputs:
        diags.append(Diagnostic("MissingOutput", "graph has no output block"))

    # The registration block must consume the input block's image directly.
    if len(inputs) == 1 and len(regs) == 1:
        wanted = Connection(inputs[0].id, "image", regs[0].id, "image")
        if wanted not in g.connections:
            diags.append(
                Diagnostic(
                    "RegistrationNotAfterInput",
                    "registration block must consume the input block's image",
                    (regs[0].id,),
                )
            )

    seen_inputs: set[tuple[str, str]] = set()
    for c in g.connections:
        key = (c.to_block, c.to_port)
        if key in seen_inputs:
            diags.append(
                Diagnostic(
                    "DuplicateInputConnection",
                    f"input port {c.to_block}.{c.to_port} has multiple connections",
                    (c.to_block,),
                )
            )
        seen_inputs.add(key)
        src_type = KIND_SPECS[g.by_id[c.from_block].kind].outputs[c.from_port]
        dst_spec = KIND_SPECS[g.by_id[c.to_block].kind]
        if not dst_spec.variadic_sink:
            accepted = dst_spec.inputs[c.to_port]
            if src_type not in accepted:
                diags.append(
                    Diagnostic(
                        "TypeMismatch",
                        f"{c.from_block}.{c.from_port} ({src_type}) cannot feed "
                        f"{c.to_block}.{c.to_port} (accepts {sorted(accepted)})",
                        (c.from_block, c.to_block),
                    )
                )

    for b in g.blocks:
        for port in KIND_SPECS[b.kind].inputs:
            if (b.id, port) not in seen_inputs:
                diags.append(
                    Diagnostic("UnconnectedInput", f"input port {b.id}.{port} is not connected", (b.id,))
                )

    names: dict[str, str] = {}
    for b in g.blocks:
        for name in b.measurement_names():
            if name in names:
                diags.append(
                    Diagnostic(
                        "DuplicateMeasurementName",
                        f"measurement name {name!r} emitted by both {names[name]!r} and {b.id!r}",
                        (names[name], b.id),
                    )
                )
            else:
                names[name] = b.id

    cycle_ids = _kahn_leftover(g)
    if cycle_ids:
        diags.append(
            Diagnostic("Cycle", f"graph contains a cycle through: {', '.join(cycle_ids)}", tuple(cycle_ids))
        )
    elif len(inputs) == 1:
        reachable = _reachable_from(g, inputs[0].id)
        stranded = sorted(b.id for b in g.blocks if b.id not in reachable and b.kind != "input")
        if stranded:
            diags.append(
                Diagnostic(
                    "Unreachable",
                    f"blocks not reachable from the input: {', '.join(stranded)}",
                    tuple(stranded),
                )
            )
    return diags


def _adjacency(g: FlowGraph) -> dict[str, set[str]]:
    adj: dict[str, set[str]] = {b.id: set() for b in g.blocks}
    for c in g.connections:
        adj[c.from_block].add(c.to_block)
    return adj


def _kahn_leftover(g: FlowGraph) -> list[str]:
    """Ids of blocks participating in cycles (empty for a DAG).

    Kahn's algorithm leaves every node downstream of a cycle as well;
    iteratively stripping leftover nodes with no leftover successor trims
    the set down to the cycle members themselves.
    """
    adj = _adjacency(g)
    indeg = {b.id: 0 for b in g.blocks}
    for src, dsts in adj.items():
        for d in dsts:
            indeg[d] += 1
    ready = sorted(b for b, n in indeg.items() if n == 0)
    done = 0
    while ready:
        node = ready.pop(0)
        done += 1
        for d in sorted(adj[node]):
            indeg[d] -= 1
            if indeg[d] == 0:
                ready.append(d)
        ready.sort()
    if done == len(indeg):
        return []
    leftover = {b for b, n in indeg.items() if n > 0}
    changed = True
    while changed:
        changed = False
        for b in sorted(leftover):
            if not (adj[b] & leftover):
                leftover.discard(b)
                changed = True
    return sorted(leftover)


def _reachable_from(g: FlowGraph, start: str) -> set[str]:
    adj = _adjacency(g)
    seen = {start}
    stack = [start]
    while stack:
        for nxt in adj[stack.pop()]:
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return seen


def topo_order(g: FlowGraph) -> list[str]:
    """Deterministic topological order, ties broken by lexicographic id.

    Raises:
        CyclicGraph: if the graph has a cycle.
    """
    adj = _adjacency(g)
    indeg = {b.id: 0 for b in g.blocks}
    for src, dsts in adj.items():
        for d in dsts:
            indeg[d] += 1
    ready = sorted(b for b, n in indeg.items() if n == 0)
    order: list[str] = []
    while ready:
        node = ready.pop(0)
        order.append(node)
        emitted = False
        for d in sorted(adj[node]):
            indeg[d] -= 1
            if indeg[d] == 0:
                ready.append(d)
                emitted = True
        if emitted:
            ready.sort()
    if len(order) != len(indeg):
        leftover = sorted(b for b, n in indeg.items() if n > 0)
        raise CyclicGraph(f"cycle through: {', '.join(leftover)}")
    return order


# ---------------------------------------------------------------------------
# Execution.


@dataclass(frozen=True)
class ExecutionAssets:
    """Recipe-side state the engine needs: the prebuilt registration model
    and the tolerance bands referenced by tolerance_check blocks.

    ``stub_identity=True`` bypasses the search and injects T = identity
    (the degenerate acquire-analyze mode used for reference runs).
    """

    model: reg.RegistrationModel | None
    tolerances: dict[str, tuple[float, float]] = field(default_factory=dict)
    stub_identity: bool = False


@dataclass(frozen=True)
class MeasurementRecord:
    measurement: tools.Measurement
    block_id: str
    stats: tools.IntensityStats | None = None


@dataclass(frozen=True)
class ToolFailure:
    block_id: str
    error: str
    message: str


@dataclass
class ExecutionOutcome:
    measurements: list[MeasurementRecord]
    failures: list[ToolFailure]
    annotations: list[overlay.Annotation]
    registration: reg.RegistrationResult


_MISSING = object()

_TOOL_ERRORS = (
    tools.RoiOutsideTarget,
    tools.InsufficientEdgePoints,
    tools.DegenerateFit,
    ValueError,
    KeyError,
)


def execute(g: FlowGraph, target: Image, assets: ExecutionAssets) -> ExecutionOutcome:
    """Run the graph on a target image.

    Registration failure aborts (nothing downstream is meaningful) and
    propagates :class:`~registra.registration.RegistrationFailed`.  Any
    other tool error is recorded and execution continues on independent
    branches.
    """
    order = topo_order(g)
    values: dict[tuple[str, str], Any] = {}
    outcome = ExecutionOutcome(measurements=[], failures=[], annotations=[], registration=None)
    ctx: tools.ToolContext | None = None

    incoming: dict[str, list[Connection]] = {b.id: [] for b in g.blocks}
    for c in g.connections:
        incoming[c.to_block].append(c)

    for block_id in order:
        block = g.by_id[block_id]
        ins: dict[str, Any] = {}
        upstream_failed = False
        for c in incoming[block_id]:
            v = values.get((c.from_block, c.from_port), _MISSING)
            if v is _MISSING:
                upstream_failed = True
            ins[c.to_port] = v
        if block.kind == "input":
            values[(block_id, "image")] = target
            continue
        if block.kind == "registration":
            result = _run_registration(assets, target)
            outcome.registration = result
            ctx = tools.ToolContext(transform=result.transform, target=target)
            values[(block_id, "image")] = target
            name = block.params.get("name") or block_id
            outcome.measurements.append(
                MeasurementRecord(
                    tools.Measurement(name=name, kind=tools.MeasurementKind.SCORE, value=result.score),
                    block_id,
                )
            )
            continue
        if upstream_failed:
            outcome.failures.append(
                ToolFailure(block_id, "UpstreamFailed", "an upstream block failed; block skipped")
            )
            continue
        if block.kind == "output":
            continue
        # Every tool block must have received the hidden context (T) and,
        # when ROI-bearing, a display transform D.
        assert ctx is not None, "engine error: tool block executed before registration"
        d = compose(ctx.transform, roi_to_parent(block.roi)) if block.roi is not None else ctx.transform
        assert d is not None
        try:
            _run_tool(block, ctx, d, ins, values, outcome, assets)
        except _TOOL_ERRORS as exc:
            outcome.failures.append(ToolFailure(block_id, type(exc).__name__, str(exc)))
    return outcome


def _run_registration(assets: ExecutionAssets, target: Image) -> reg.RegistrationResult:
    if assets.stub_identity:
        return reg.RegistrationResult(transform=identity(), score=1.0)
    if assets.model is None:
        raise ValueError("no registration model supplied")
    return reg.register(assets.model, target)


def _run_tool(
    block: BlockSpec,
    ctx: tools.ToolContext,
    d: Transform,
    ins: dict[str, Any],
    values: dict,
    outcome: ExecutionOutcome,
    assets: ExecutionAssets,
) -> None:
    name = block.params.get("name") or block.id
    kind = block.kind
    bid = block.id

    if kind == "extract_line":
        params = tools.EdgeParams(
            polarity=tools.Polarity(block.params["polarity"]),
            min_contrast=block.params["min_contrast"],
            num_scanlines=block.params["num_scanlines"],
            smoothing=block.params["smoothing"],
        )
        line = tools.extract_line(ctx, block.roi, params)
        values[(bid, "line")] = line
        values[(bid, "point")] = line.point
        outcome.annotations.append(overlay.roi_outline(block.roi, d, block_id=bid))
        seg = _line_in_roi(line, block.roi)
        if seg is not None:
            outcome.annotations.append(overlay.segment(seg[0], seg[1], d, block_id=bid))
        return

    if kind == "measure_angle":
        m = tools.measure_angle(ins["a"], ins["b"], mode=block.params["mode"], name=name)
        values[(bid, "value")] = m.value
        outcome.measurements.append(MeasurementRecord(m, bid))
        anchor = _midpoint(ins["a"].point, ins["b"].point)
        outcome.annotations.append(
            overlay.label(f"{name}={m.value:.2f}deg", anchor, ctx.transform, block_id=bid)
        )
        return

    if kind == "measure_distance":
        a, b = ins["a"], ins["b"]
        b_pt = b.point if isinstance(b, tools.LineModel) else b
        m = tools.measure_distance(a, b_pt, name=name)
        values[(bid, "value")] = m.value
        outcome.measurements.append(MeasurementRecord(m, bid))
        if isinstance(a, tools.LineModel):
            foot = _project_on_line(a, b_pt)
            outcome.annotations.append(overlay.segment(foot, b_pt, ctx.transform, block_id=bid))
            anchor = _midpoint(foot, b_pt)
        else:
            outcome.annotations.append(overlay.segment(a, b_pt, ctx.transform, block_id=bid))
            anchor = _midpoint(a, b_pt)
        outcome.annotations.append(
            overlay.label(f"{name}={m.value:.2f}px", anchor, ctx.transform, block_id=bid)
        )
        return

    if kind == "measure_intensity":
        m, stats = tools.measure_intensity(ctx, block.roi, name=name)
        values[(bid, "value")] = m.value
        outcome.measurements.append(MeasurementRecord(m, bid, stats=stats))
        outcome.annotations.append(overlay.roi_outline(block.roi, d, block_id=bid))
        return

    if kind == "extract_blobs":
        blobs = tools.extract_blobs(
            ctx,
            block.roi,
            threshold=block.params["threshold"],
            polarity=block.params["polarity"],
            keep_border=block.params["keep_border"],
        )
        values[(bid, "blobs")] = blobs
        values[(bid, "count")] = float(len(blobs))
        total_area = float(sum(b.area for b in blobs))
        values[(bid, "area")] = total_area
        outcome.measurements.append(
            MeasurementRecord(
                tools.Measurement(f"{name}_count", tools.MeasurementKind.BLOB_COUNT, float(len(blobs))),
                bid,
            )
        )
        outcome.measurements.append(
            MeasurementRecord(
                tools.Measurement(f"{name}_area", tools.MeasurementKind.BLOB_AREA_PX2, total_area), bid
            )
        )
        outcome.annotations.append(overlay.roi_outline(block.roi, d, block_id=bid))
        inv_local = invert(roi_to_parent(block.roi))
        for blob in blobs:
            outcome.annotations.append(overlay.marker(apply(inv_local, blob.centroid), d, block_id=bid))
        return

    if kind == "tolerance_check":
        tol_name = block.params["name"]
        if tol_name not in assets.tolerances:
            raise KeyError(f"tolerance_check {bid!r}: no tolerance band named {tol_name!r}")
        lo, hi = assets.tolerances[tol_name]
        v = float(ins["value"])
        values[(bid, "verdict")] = "PASS" if lo <= v <= hi else "FAIL"
        return

    raise ValueError(f"unhandled block kind {kind!r}")  # pragma: no cover


def _midpoint(a: Point2, b: Point2) -> Point2:
    return Point2((a.x + b.x) / 2.0, (a.y + b.y) / 2.0)


def _project_on_line(line: tools.LineModel, p: Point2) -> Point2:
    ux, uy = line.direction
    t = (p.x - line.point.x) * ux + (p.y - line.point.y) * uy
    return Point2(line.point.x + t * ux, line.point.y + t * uy)


def _line_in_roi(line: tools.LineModel, roi: Roi) -> tuple[Point2, Point2] | None:
    """Clip the fitted (source-frame) line to the ROI's local rectangle."""
    to_local = invert(roi_to_parent(roi))
    p = apply(to_local, line.point)
    rad = math.radians(-roi.theta)
    ux = line.direction[0] * math.cos(rad) - line.direction[1] * math.sin(rad)
    uy = line.direction[0] * math.sin(rad) + line.direction[1] * math.cos(rad)
    t_lo, t_hi = -math.inf, math.inf
    for origin, direction, limit in ((p.x, ux, roi.width), (p.y, uy, roi.height)):
        if abs(direction) < 1e-12:
            if origin < 0 or origin > limit:
                return None
            continue
        t0, t1 = (0 - origin) / direction, (limit - origin) / direction
        if t0 > t1:
            t0, t1 = t1, t0
        t_lo, t_hi = max(t_lo, t0), min(t_hi, t1)
    if not (t_lo < t_hi) or not (math.isfinite(t_lo) and math.isfinite(t_hi)):
        return None
    return (Point2(p.x + t_lo * ux, p.y + t_lo * uy), Point2(p.x + t_hi * ux, p.y + t_hi * uy))
