"""skp-lite: the JSON serialization of programs.

Colors are unpremultiplied in files and premultiplied in memory; the
conversion happens exactly at load and save.  Loading also normalizes:
gradient stops are clamped, sorted by running maximum and padded to span
[0, 1]; shapes are put in canonical form (see ``normalize_shape``).
"""
from __future__ import annotations

import json
import math
from typing import Any

from .color import (
    OPAQUE_BLACK,
    BlendMode,
    Color,
    FilterKind,
    LinearGradient,
    Point,
    RadialGradient,
    Solid,
)
from .commands import (
    NOOP,
    RESTORE,
    SAVE,
    Clip,
    Draw,
    NoOp,
    Program,
    Restore,
    Save,
    SaveLayer,
    UnbalancedError,
    check_balanced,
)
from .layers import Paint
from .shapes import Circle, EmptyShape, Full, Intersect, Rect, Union, normalize_shape

FORMAT_VERSION = 1

_BLENDS = {m.value: m for m in BlendMode}
_FILTERS = {f.value: f for f in FilterKind}


class FormatError(ValueError):
    """Base class for load failures."""


class SchemaError(FormatError):
    def __init__(self, path: str, reason: str):
        self.path = path
        self.reason = reason
        super().__init__(f"schema error at {path}: {reason}")


class InvariantError(FormatError):
    def __init__(self, index: int, reason: str):
        self.index = index
        self.reason = reason
        super().__init__(f"invariant error in command {index}: {reason}")


class Unbalanced(FormatError):
    def __init__(self, kind: str, index: int):
        self.kind = kind
        self.index = index
        super().__init__(f"unbalanced program: {kind} at command {index}")


class VersionSkew(SchemaError):
    """A schema error at ``$.version``; kept distinct so readers can report skew."""

    def __init__(self, version: Any):
        self.version = version
        super().__init__("$.version", f"unsupported skp-lite version {version!r}")


# ---------------------------------------------------------------------------
# Decoding
# ---------------------------------------------------------------------------

class _Decoder:
    def __init__(self, index: int, path: str):
        self.index = index
        self.path = path

    def fail(self, path: str, reason: str):
        raise SchemaError(path, reason)

    def invariant(self, reason: str):
        raise InvariantError(self.index, reason)

    def obj(self, v, path):
        if not isinstance(v, dict):
            self.fail(path, "expected an object")
        return v

    def number(self, v, path) -> float:
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            self.fail(path, "expected a number")
        v = float(v)
        if not math.isfinite(v):
            self.invariant(f"{path} is not finite")
        return v

    def point(self, v, path) -> Point:
        if not isinstance(v, list) or len(v) != 2:
            self.fail(path, "expected [x, y]")
        return Point(self.number(v[0], path + "[0]"), self.number(v[1], path + "[1]"))

    def field(self, d, key, path):
        if key not in d:
            self.fail(f"{path}.{key}", "missing field")
        return d[key]

    def color(self, v, path) -> Color:
        d = self.obj(v, path)
        extra = set(d) - {"a", "r", "g", "b"}
        if extra:
            self.fail(path, f"unknown color fields {sorted(extra)}")
        a, r, g, b = (self.number(self.field(d, k, path), f"{path}.{k}") for k in "argb")
        c = Color.from_unpremultiplied(a, r, g, b)
        if not c.is_valid() or not all(0.0 <= u <= 1.0 for u in (r, g, b)):
            self.invariant(f"color {path} out of range: a={a} r={r} g={g} b={b}")
        return c

    def stops(self, v, path) -> tuple:
        if not isinstance(v, list):
            self.fail(path, "expected a list of stops")
        if not v:
            self.invariant(f"{path} has no color stops")
        out = []
        for k, s in enumerate(v):
            p = f"{path}[{k}]"
            if not isinstance(s, list) or len(s) != 2:
                self.fail(p, "expected [offset, color]")
            out.append((self.number(s[0], p + "[0]"), self.color(s[1], p + "[1]")))
        return normalize_stops(out)

    def fill(self, v, path):
        d = self.obj(v, path)
        kind = self.field(d, "type", path)
        if kind == "solid":
            return Solid(self.color(self.field(d, "color", path), path + ".color"))
        if kind == "linearGradient":
            p0 = self.point(self.field(d, "p0", path), path + ".p0")
            p1 = self.point(self.field(d, "p1", path), path + ".p1")
            if p0 == p1:
                self.invariant(f"{path} has coincident gradient endpoints")
            return LinearGradient(p0, p1, self.stops(self.field(d, "stops", path), path + ".stops"))
        if kind == "radialGradient":
            c = self.point(self.field(d, "center", path), path + ".center")
            r = self.number(self.field(d, "radius", path), path + ".radius")
            if not r > 0:
                self.invariant(f"{path} radius must be positive")
            return RadialGradient(c, r, self.stops(self.field(d, "stops", path), path + ".stops"))
        self.fail(path + ".type", f"unknown fill type {kind!r}")

    def paint(self, v, path) -> Paint:
        d = self.obj(v, path)
        fill = self.fill(d["fill"], path + ".fill") if "fill" in d else Solid(OPAQUE_BLACK)
        flt = d.get("filter", "id")
        if flt not in _FILTERS:
            self.fail(path + ".filter", f"unknown filter {flt!r}")
        blend = d.get("blend", "srcOver")
        if blend not in _BLENDS:
            self.fail(path + ".blend", f"unknown blend {blend!r}")
        return Paint(fill, _FILTERS[flt], _BLENDS[blend])

    def shape(self, v, path, depth=0):
        if depth > 64:
            self.fail(path, "shape nesting too deep")
        d = self.obj(v, path)
        kind = self.field(d, "type", path)
        if kind == "rect":
            ltrb = self.field(d, "ltrb", path)
            if not isinstance(ltrb, list) or len(ltrb) != 4:
                self.fail(path + ".ltrb", "expected [l, t, r, b]")
            l, t, r, b = (self.number(x, f"{path}.ltrb[{k}]") for k, x in enumerate(ltrb))
            if l > r or t > b:
                self.invariant(f"{path} is inverted")
            return Rect(l, t, r, b)
        if kind == "circle":
            c = self.point(self.field(d, "center", path), path + ".center")
            r = self.number(self.field(d, "radius", path), path + ".radius")
            if r < 0:
                self.invariant(f"{path} has negative radius")
            return Circle(c, r)
        if kind == "full":
            return Full()
        if kind == "empty":
            return EmptyShape()
        if kind in ("intersect", "union"):
            lhs = self.shape(self.field(d, "lhs", path), path + ".lhs", depth + 1)
            rhs = self.shape(self.field(d, "rhs", path), path + ".rhs", depth + 1)
            return Intersect(lhs, rhs) if kind == "intersect" else Union(lhs, rhs)
        self.fail(path + ".type", f"unknown shape type {kind!r}")

    def command(self, v, allow_noop=False):
        path = self.path
        d = self.obj(v, path)
        op = self.field(d, "op", path)
        if op == "draw":
            return Draw(normalize_shape(self.shape(self.field(d, "shape", path), path + ".shape")),
                        self.paint(self.field(d, "paint", path), path + ".paint"))
        if op == "clip":
            return Clip(normalize_shape(self.shape(self.field(d, "shape", path), path + ".shape")))
        if op == "save":
            return SAVE
        if op == "saveLayer":
            return SaveLayer(self.paint(d.get("paint", {}), path + ".paint"))
        if op == "restore":
            return RESTORE
        if op == "noop" and allow_noop:
            return NOOP
        self.fail(path + ".op", f"unknown op {op!r}")


def normalize_stops(stops) -> tuple:
    out = []
    hi = 0.0
    for off, c in stops:
        off = max(hi, min(max(off, 0.0), 1.0))
        hi = off
        out.append((off, c))
    if out[0][0] > 0.0:
        out.insert(0, (0.0, out[0][1]))
    if out[-1][0] < 1.0:
        out.append((1.0, out[-1][1]))
    return tuple(out)


def decode_command(obj: Any, index: int = 0, allow_noop: bool = False):
    return _Decoder(index, f"commands[{index}]").command(obj, allow_noop)


def program_from_json(doc: Any) -> Program:
    if not isinstance(doc, dict):
        raise SchemaError("$", "expected an object")
    if "version" not in doc:
        raise SchemaError("$.version", "missing field")
    if doc["version"] != FORMAT_VERSION:
        raise VersionSkew(doc["version"])
    cmds = doc.get("commands")
    if not isinstance(cmds, list):
        raise SchemaError("$.commands", "expected a list")
    records = [decode_command(c, i) for i, c in enumerate(cmds)]
    try:
        check_balanced(records)
    except UnbalancedError as e:
        raise Unbalanced(e.kind, e.index) from None
    return Program(records)


def load_program(data: bytes | str) -> Program:
    """Parse, validate and normalize an skp-lite document."""
    try:
        doc = json.loads(data)
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise SchemaError("$", f"invalid JSON: {e}") from None
    return program_from_json(doc)


# ---------------------------------------------------------------------------
# Encoding
# ---------------------------------------------------------------------------

def _unpremultiply_channel(c: float, a: float) -> float:
    """A channel value ``u`` with ``u * a == c`` exactly, when one exists nearby."""
    if a <= 0.0:
        return 0.0
    u = min(c / a, 1.0)
    if u * a == c:
        return u
    for direction in (math.inf, -math.inf):
        v = u
        for _ in range(4):
            v = math.nextafter(v, direction)
            if 0.0 <= v <= 1.0 and v * a == c:
                return v
    return u


def color_to_json(c: Color) -> dict:
    a = c.a
    return {"a": a, "r": _unpremultiply_channel(c.r, a),
            "g": _unpremultiply_channel(c.g, a), "b": _unpremultiply_channel(c.b, a)}


def fill_to_json(f) -> dict:
    if isinstance(f, Solid):
        return {"type": "solid", "color": color_to_json(f.color)}
    stops = [[o, color_to_json(c)] for o, c in f.stops]
    if isinstance(f, LinearGradient):
        return {"type": "linearGradient", "p0": list(f.p0), "p1": list(f.p1), "stops": stops}
    return {"type": "radialGradient", "center": list(f.center), "radius": f.radius,
            "stops": stops}


def paint_to_json(p: Paint) -> dict:
    return {"fill": fill_to_json(p.fill), "filter": p.filter.value, "blend": p.blend.value}


def shape_to_json(s) -> dict:
    if isinstance(s, Rect):
        return {"type": "rect", "ltrb": [s.left, s.top, s.right, s.bottom]}
    if isinstance(s, Circle):
        return {"type": "circle", "center": list(s.center), "radius": s.radius}
    if isinstance(s, Full):
        return {"type": "full"}
    if isinstance(s, EmptyShape):
        return {"type": "empty"}
    kind = "intersect" if isinstance(s, Intersect) else "union"
    return {"type": kind, "lhs": shape_to_json(s.lhs), "rhs": shape_to_json(s.rhs)}


def command_to_json(cmd) -> dict:
    if isinstance(cmd, Draw):
        return {"op": "draw", "shape": shape_to_json(cmd.shape), "paint": paint_to_json(cmd.paint)}
    if isinstance(cmd, Clip):
        return {"op": "clip", "shape": shape_to_json(cmd.shape)}
    if isinstance(cmd, Save):
        return {"op": "save"}
    if isinstance(cmd, SaveLayer):
        return {"op": "saveLayer", "paint": paint_to_json(cmd.paint)}
    if isinstance(cmd, Restore):
        return {"op": "restore"}
    if isinstance(cmd, NoOp):
        return {"op": "noop"}
    raise TypeError(f"not a command: {cmd!r}")


def program_to_json(p: Program) -> dict:
    return {"version": FORMAT_VERSION,
            "commands": [command_to_json(c) for c in p.records if not isinstance(c, NoOp)]}


def save_program(p: Program, indent: int | None = None) -> bytes:
    return json.dumps(program_to_json(p), indent=indent).encode("utf-8")


def normalize_program(p: Program) -> Program:
    """Canonical in-memory form: what ``load(save(p))`` produces."""
    return program_from_json(json.loads(save_program(p)))
