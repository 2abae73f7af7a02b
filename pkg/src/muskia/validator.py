"""Translation validation of rewrite traces.

Every pass application in a trace is one step.  A step is checked three
ways: its claimed rewrites are re-derived from the before snapshot by a
straight-line scan written separately from the optimizer's matchers, both
snapshots are rasterized and compared, and the two layer terms are compared
at sampled points.  Nothing here imports the optimizer's passes or rewrite
helpers; only the trace data types are shared.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .color import (
    BlendMode,
    FilterKind,
    LinearGradient,
    RadialGradient,
    Solid,
    filter_eval,
    gradient_all_stops_opaque,
    is_opaque,
)
from .commands import NOOP, RESTORE, SAVE, Clip, Draw, NoOp, Program, Restore, Save, SaveLayer, run
from .layers import Paint, layer_equiv_sampled, sample_points
from .optimizer.trace import TRACE_SCHEMA, Application, RewriteTrace, TraceEntry, TraceVersionSkew
from .raster import DiffReport, RasterImage, image_diff_ae, rasterize
from .skplite import FormatError, SchemaError, decode_command, program_from_json

VERDICT_SCHEMA = "muskia-verdict/1"

VALIDATED = "validated"
REFUTED = "refuted"
SIDECHECK_FAILED = "sidecheck_failed"
INCONCLUSIVE = "inconclusive"

SO = BlendMode.SRC_OVER
DST_IN = BlendMode.DST_IN


@dataclass(frozen=True)
class ValidateConfig:
    resolution: int = 256
    samples: int = 4096
    seed: int = 0
    tol: float = 1e-6
    fuzz: float = 0.01

    def __post_init__(self):
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")
        if self.samples < 0:
            raise ValueError("samples must be non-negative")


@dataclass
class StepResult:
    step: int
    pass_name: str
    sidecheck: Optional[str] = None        # None when it passed, else the reason
    differential: Optional[DiffReport] = None
    symbolic: Optional[dict] = None        # None when it passed, else point and deltas
    inconclusive: Optional[str] = None

    @property
    def refuted(self) -> bool:
        return (self.differential is not None and self.differential.differing_pixels > 0) or (
            self.symbolic is not None)

    @property
    def ok(self) -> bool:
        return self.inconclusive is None and self.sidecheck is None and not self.refuted

    def to_json(self) -> dict:
        return {
            "step": self.step,
            "pass_name": self.pass_name,
            "sidecheck": "pass" if self.sidecheck is None else {"fail": self.sidecheck},
            "differential": self.differential.to_json() if self.differential else None,
            "symbolic": "pass" if self.symbolic is None else {"fail": self.symbolic},
            "inconclusive": self.inconclusive,
        }


@dataclass
class ValidationVerdict:
    steps: list = field(default_factory=list)
    overall: str = VALIDATED
    step: Optional[int] = None
    reason: Optional[str] = None

    @property
    def validated(self) -> bool:
        return self.overall == VALIDATED

    def to_json(self) -> dict:
        return {
            "schema": VERDICT_SCHEMA,
            "overall": self.overall,
            "step": self.step,
            "reason": self.reason,
            "steps": [s.to_json() for s in self.steps],
        }

    def dumps(self, indent: Optional[int] = 2) -> str:
        return json.dumps(self.to_json(), indent=indent)

    def summary(self) -> str:
        lines = [f"{len(self.steps)} step(s): {self.overall}"
                 + (f" at step {self.step}" if self.step is not None else "")
                 + (f" ({self.reason})" if self.reason else "")]
        for s in self.steps:
            if s.inconclusive:
                status = f"inconclusive: {s.inconclusive}"
            elif s.ok:
                status = "ok"
            else:
                parts = []
                if s.sidecheck:
                    parts.append(f"sidecheck: {s.sidecheck}")
                if s.differential and s.differential.differing_pixels:
                    d = s.differential
                    parts.append(f"{d.differing_pixels} differing pixels, worst at {d.worst_pixel}")
                if s.symbolic:
                    parts.append(f"sample {s.symbolic['point']} differs by {s.symbolic['delta']}")
                status = "; ".join(parts)
            lines.append(f"  step {s.step} [{s.pass_name}] {status}")
        return "\n".join(lines)


def _assemble(steps: list) -> ValidationVerdict:
    v = ValidationVerdict(steps)
    for s in steps:
        if s.refuted:
            v.overall, v.step = REFUTED, s.step
            v.reason = "pixel difference" if s.differential and s.differential.differing_pixels \
                else "sample difference"
            return v
    for s in steps:
        if s.sidecheck is not None:
            v.overall, v.step, v.reason = SIDECHECK_FAILED, s.step, s.sidecheck
            return v
    for s in steps:
        if s.inconclusive is not None:
            v.overall, v.step, v.reason = INCONCLUSIVE, s.step, s.inconclusive
            return v
    return v


# ---------------------------------------------------------------------------
# Side-condition re-scan
# ---------------------------------------------------------------------------

class _Reject(Exception):
    pass


def _need(cond: bool, reason: str) -> None:
    if not cond:
        raise _Reject(reason)


class _Scan:
    """Bracket matches and enclosing-layer links for a NoOp-free snapshot."""

    def __init__(self, records: Sequence):
        self.records = records
        self.match: dict = {}
        self.parent = [-1] * len(records)      # innermost open opener, -1 at top level
        opens: list = []
        for i, rec in enumerate(records):
            self.parent[i] = opens[-1] if opens else -1
            if isinstance(rec, (Save, SaveLayer)):
                opens.append(i)
            elif isinstance(rec, Restore):
                _need(bool(opens), f"unmatched Restore at {i}")
                self.match[opens.pop()] = i
            elif isinstance(rec, NoOp):
                raise _Reject(f"tombstone in snapshot at {i}")
        _need(not opens, "unclosed opener")

    def at(self, i: int, kind, what: str):
        _need(0 <= i < len(self.records), f"{what} index {i} out of range")
        rec = self.records[i]
        _need(isinstance(rec, kind), f"{what} at {i} is {type(rec).__name__}")
        return rec

    def layer_scope(self, i: int) -> tuple:
        """Content range of the innermost SaveLayer around ``i`` (the whole program if none),
        plus whether a plain Save sits between that layer and ``i``."""
        p = self.parent[i]
        under_save = False
        while p >= 0 and not isinstance(self.records[p], SaveLayer):
            under_save = True
            p = self.parent[p]
        if p < 0:
            return 0, len(self.records), under_save
        return p + 1, self.match[p], under_save


def _paint_plain_srcover(paint: Paint) -> bool:
    return paint.blend is SO and paint.filter is FilterKind.ID


def _tombstones(records, indices) -> tuple:
    return tuple((i, records[i], NOOP) for i in indices)


def _expect_srcover(scan: _Scan, e: TraceEntry):
    b = scan.records
    L = e.fired_at
    layer = scan.at(L, SaveLayer, "layer")
    _need(_paint_plain_srcover(layer.paint), "layer paint is not plain SrcOver")
    _need(gradient_all_stops_opaque(layer.paint.fill), "layer paint is not opaque")
    for k in range(L + 1, scan.match[L]):
        _need(not isinstance(b[k], SaveLayer), f"nested SaveLayer at {k}")
        if isinstance(b[k], Draw):
            _need(b[k].paint.blend is SO, f"draw at {k} does not use SrcOver")
    return ((L, layer, SAVE),), ()


def _expect_luma(scan: _Scan, e: TraceEntry):
    b = scan.records
    O = e.fired_at
    outer = scan.at(O, SaveLayer, "mask layer")
    _need(outer.paint.blend is DST_IN, "outer layer is not DstIn")
    _need(scan.match[O] == O + 4, "mask layer body is not exactly one luminance layer")
    inner = scan.at(O + 1, SaveLayer, "luminance layer")
    _need(inner.paint.blend is SO and inner.paint.filter is FilterKind.LUMA,
          "inner layer is not a SrcOver luminance layer")
    _need(scan.match[O + 1] == O + 3, "luminance layer holds more than one command")
    d = scan.at(O + 2, Draw, "draw")
    _need(isinstance(d.paint.fill, Solid), "inner draw is not a solid color")
    _need(_paint_plain_srcover(d.paint), "inner draw is not plain SrcOver")
    luma = filter_eval(FilterKind.LUMA, d.paint.fill.color)
    new = Draw(d.shape, Paint(Solid(luma), FilterKind.ID, d.paint.blend))
    return ((O + 1, inner, NOOP), (O + 2, d, new), (O + 3, b[O + 3], NOOP)), ()


def _expect_gradient(scan: _Scan, e: TraceEntry):
    b = scan.records
    A = e.fired_at
    anchor = scan.at(A, Draw, "anchor")
    _need(anchor.paint.blend is SO, "anchor does not use SrcOver")
    layer = scan.at(A + 1, SaveLayer, "mask layer")
    _need(layer.paint.blend is DST_IN and layer.paint.filter is FilterKind.ID,
          "mask layer is not an unfiltered DstIn layer")
    _need(scan.match[A + 1] == A + 3, "mask layer holds more than one command")
    m = scan.at(A + 2, Draw, "mask draw")
    _need(isinstance(m.paint.fill, (LinearGradient, RadialGradient)), "mask fill is not a gradient")
    _need(gradient_all_stops_opaque(m.paint.fill), "a gradient stop is not opaque")
    _need(_paint_plain_srcover(m.paint), "mask draw is not plain SrcOver")
    _need(m.shape == anchor.shape, "mask shape differs from the anchor shape")
    start, _end, _ = scan.layer_scope(A)
    for k in range(start, A):
        _need(not isinstance(b[k], (Draw, SaveLayer)), f"layer already drawn at {k}")
    return _tombstones(b, (A + 1, A + 2, A + 3)), ()


def _mask_opaque(layer_filter: FilterKind, d: Draw) -> bool:
    luma_layer = layer_filter is FilterKind.LUMA
    luma_draw = d.paint.filter is FilterKind.LUMA
    if luma_layer and luma_draw:
        return False
    c = d.paint.fill.color
    if luma_layer or luma_draw:
        return is_opaque(filter_eval(FilterKind.LUMA, c))
    return is_opaque(c)


def _expect_dstin(scan: _Scan, e: TraceEntry):
    b = scan.records
    M = e.fired_at
    layer = scan.at(M, SaveLayer, "mask layer")
    _need(layer.paint.blend is DST_IN, "mask layer is not DstIn")
    R = scan.match[M]
    D = R - 1
    d = scan.at(D, Draw, "mask draw")
    clips = [scan.at(k, Clip, "mask clip") for k in range(M + 1, D)]
    _need(isinstance(d.paint.fill, Solid), "mask draw is not a solid color")
    _need(d.paint.blend is SO, "mask draw does not use SrcOver")
    _need(_mask_opaque(layer.paint.filter, d), "mask is not opaque")
    start, end, under_save = scan.layer_scope(M)
    _need(not under_save, "mask layer sits inside a Save")
    _need(R + 1 == end, "mask layer is not the last command of its scope")
    depth = 0
    for k in range(start, M):
        rec = b[k]
        _need(not isinstance(rec, SaveLayer), f"SaveLayer before the mask at {k}")
        if isinstance(rec, Save):
            depth += 1
        elif isinstance(rec, Restore):
            depth -= 1
        elif isinstance(rec, Clip):
            _need(depth > 0, f"unscoped clip before the mask at {k}")
        elif isinstance(rec, Draw):
            _need(rec.paint.blend is SO, f"draw at {k} does not use SrcOver")
    head = [SAVE, Clip(d.shape), *clips]
    inserted = tuple((start, c) for c in head) + ((end, RESTORE),)
    return _tombstones(b, range(M, R + 1)), inserted


_EXPECT = {
    "srcover_savelayer": _expect_srcover,
    "subsume_luma": _expect_luma,
    "gradient_mask": _expect_gradient,
    "dstin_to_clip": _expect_dstin,
}


def _apply(before: Sequence, entries: Sequence[TraceEntry]) -> list:
    out = list(before)
    inserts: dict = {}
    for e in entries:
        for pos, _old, new in e.edits:
            _need(0 <= pos < len(out), f"edit position {pos} out of range")
            out[pos] = new
        for pos, cmd in e.inserted:
            _need(0 <= pos <= len(out), f"insertion position {pos} out of range")
            inserts.setdefault(pos, []).append(cmd)
    merged = []
    for pos in range(len(out) + 1):
        merged.extend(inserts.get(pos, ()))
        if pos < len(out):
            merged.append(out[pos])
    return [r for r in merged if not isinstance(r, NoOp)]


def sidecheck_step(before: Program, after: Program, app: Application,
                   entries: Sequence[TraceEntry]) -> Optional[str]:
    """Reason the step's claims do not hold, or None when they all do."""
    try:
        _need(bool(entries), "application has no entries")
        scan = _Scan(before.records)
        for e in entries:
            _need(e.pass_name == app.pass_name, f"entry of {e.pass_name} in a {app.pass_name} step")
            expect = _EXPECT.get(e.pass_name)
            _need(expect is not None, f"unknown pass {e.pass_name!r}")
            edits, inserted = expect(scan, e)
            _need(tuple(e.edits) == edits, f"{e.pass_name} at {e.fired_at}: edits differ from the rewrite")
            _need(tuple(e.inserted) == inserted,
                  f"{e.pass_name} at {e.fired_at}: insertions differ from the rewrite")
        _need(tuple(_apply(before.records, entries)) == after.records,
              "after-snapshot is not the result of the entries")
    except _Reject as r:
        return str(r)
    return None


# ---------------------------------------------------------------------------
# Driver
# ---------------------------------------------------------------------------

class _Rasters:
    def __init__(self, size: int, cache: Optional[dict]):
        self.size = size
        self.cache = cache if cache is not None else {}

    def get(self, program: Program) -> RasterImage:
        key = (program, self.size)
        img = self.cache.get(key)
        if img is None:
            img = self.cache[key] = rasterize(program, self.size, self.size)
        return img


def _symbolic(before: Program, after: Program, cfg: ValidateConfig, step: int) -> Optional[dict]:
    a, b = run(before), run(after)
    pts = sample_points([a, b], n_random=cfg.samples, seed=cfg.seed + step,
                        bounds=(0.0, 0.0, float(cfg.resolution), float(cfg.resolution)))
    res = layer_equiv_sampled(a, b, pts, tol=cfg.tol)
    if res.equivalent:
        return None
    return {"point": list(res.witness), "delta": list(res.witness_delta)}


def _validate_steps(snapshots: list, entries: list, applications: list,
                    cfg: ValidateConfig, raster_cache: Optional[dict]) -> list:
    rasters = _Rasters(cfg.resolution, raster_cache)
    steps = []
    for k, app in enumerate(applications):
        res = StepResult(k, app.pass_name)
        steps.append(res)
        try:
            before = snapshots[app.before_snapshot_id]
            after = snapshots[app.after_snapshot_id]
            step_entries = [entries[i] for i in app.entries]
        except (IndexError, TypeError):
            res.sidecheck = "step refers to a missing snapshot or entry"
            continue
        if isinstance(before, Exception) or isinstance(after, Exception):
            bad = before if isinstance(before, Exception) else after
            res.inconclusive = f"snapshot does not decode: {bad}"
            continue
        if (app.before_snapshot_id, app.after_snapshot_id) != (k, k + 1):
            res.sidecheck = "steps do not walk consecutive snapshots"
        if any(e.before_snapshot_id != app.before_snapshot_id
               or e.after_snapshot_id != app.after_snapshot_id for e in step_entries):
            res.sidecheck = res.sidecheck or "entry snapshot ids disagree with the step"
        res.sidecheck = res.sidecheck or sidecheck_step(before, after, app, step_entries)
        try:
            res.differential = image_diff_ae(rasters.get(before), rasters.get(after), cfg.fuzz)
            res.symbolic = _symbolic(before, after, cfg, k)
        except ValueError as err:
            # unbalanced snapshots and the like: the claim cannot be evaluated
            res.inconclusive = f"cannot evaluate snapshots: {err}"
    return steps


def validate_trace(trace: RewriteTrace, config: Optional[ValidateConfig] = None,
                   raster_cache: Optional[dict] = None) -> ValidationVerdict:
    """Check every step of a decoded trace.

    ``raster_cache`` maps ``(program, size)`` to images and may be shared
    across calls.
    """
    cfg = config or ValidateConfig()
    steps = _validate_steps(list(trace.snapshots), list(trace.entries), list(trace.applications),
                            cfg, raster_cache)
    return _assemble(steps)


def _decode_entry(e: dict, k: int) -> TraceEntry:
    return TraceEntry(
        str(e["pass_name"]), int(e["fired_at"]),
        tuple((int(x["index"]), decode_command(x["old"], k),
               decode_command(x["new"], k, allow_noop=True)) for x in e["edits"]),
        tuple((int(x["index"]), decode_command(x["command"], k)) for x in e["inserted"]),
        int(e["before_snapshot_id"]), int(e["after_snapshot_id"]))


def validate_document(doc, config: Optional[ValidateConfig] = None,
                      raster_cache: Optional[dict] = None) -> ValidationVerdict:
    """Validate a trace JSON document.

    Snapshots decode one by one, so a snapshot this version cannot read
    only makes the steps touching it inconclusive.  A document that does
    not decode at all is inconclusive as a whole, never validated.
    """
    cfg = config or ValidateConfig()
    try:
        if not isinstance(doc, dict):
            raise SchemaError("$", "expected an object")
        if doc.get("schema") != TRACE_SCHEMA:
            raise TraceVersionSkew(doc.get("schema"))
        snapshots: list = []
        for s in doc["snapshots"]:
            try:
                snapshots.append(program_from_json(s))
            except FormatError as err:
                snapshots.append(err)
        entries = [_decode_entry(e, k) for k, e in enumerate(doc["entries"])]
        apps = [Application(str(a["pass_name"]), int(a["iteration"]), int(a["before_snapshot_id"]),
                            int(a["after_snapshot_id"]), tuple(int(x) for x in a["entries"]))
                for a in doc["applications"]]
    except (FormatError, KeyError, TypeError, ValueError) as err:
        return ValidationVerdict([], INCONCLUSIVE, None, f"trace does not decode: {err}")
    return _assemble(_validate_steps(snapshots, entries, apps, cfg, raster_cache))


def validate_text(data: bytes | str, config: Optional[ValidateConfig] = None) -> ValidationVerdict:
    try:
        doc = json.loads(data)
    except (json.JSONDecodeError, UnicodeDecodeError) as err:
        return ValidationVerdict([], INCONCLUSIVE, None, f"invalid JSON: {err}")
    return validate_document(doc, config)
