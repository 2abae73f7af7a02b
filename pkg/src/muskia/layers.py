"""Layer terms and their denotation as images (Point -> Color)."""
from __future__ import annotations

import typing
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .color import (
    OPAQUE_BLACK,
    TRANSPARENT,
    BlendMode,
    Color,
    FilterKind,
    Image,
    Point,
    Solid,
    blend_channels,
    fill_channels,
    filter_channels,
)
from .shapes import Shape, key_points, shape_contains, shape_contains_many, shape_intersect


@dataclass(frozen=True)
class Paint:
    fill: Image = Solid(OPAQUE_BLACK)
    filter: FilterKind = FilterKind.ID
    blend: BlendMode = BlendMode.SRC_OVER


@dataclass(frozen=True)
class Empty:
    pass


@dataclass(frozen=True)
class DrawShape:
    base: "LayerTerm"
    shape: Shape
    paint: Paint


@dataclass(frozen=True)
class BlendLayer:
    bottom: "LayerTerm"
    top: "LayerTerm"
    paint: Paint


EMPTY = Empty()

LayerTerm = typing.Union[Empty, DrawShape, BlendLayer]


class ClipAllError(ValueError):
    """clip_all reached a BlendLayer, on which it is undefined."""


def denote(term: LayerTerm, pt: Point) -> Color:
    """Evaluate a layer term at one point by direct structural recursion."""
    if isinstance(term, Empty):
        return TRANSPARENT
    if isinstance(term, BlendLayer):
        p = term.paint
        top = filter_channels(p.filter, denote(term.top, pt))
        return Color(*blend_channels(p.blend, denote(term.bottom, pt), top))
    if isinstance(term, DrawShape):
        p = term.paint
        if shape_contains(term.shape, pt):
            src = fill_channels(p.fill, pt[0], pt[1])
        else:
            src = TRANSPARENT
        return Color(*blend_channels(p.blend, denote(term.base, pt), filter_channels(p.filter, src)))
    raise TypeError(f"not a layer term: {term!r}")


def denote_many(term: LayerTerm, xs: np.ndarray, ys: np.ndarray) -> tuple:
    """Evaluate a term at many points at once.

    Returns ``(a, r, g, b)`` arrays shaped like ``xs``.  Chains of draws are
    unrolled iteratively so long programs do not hit the recursion limit.
    """
    chain = []
    while isinstance(term, DrawShape):
        chain.append(term)
        term = term.base
    if isinstance(term, Empty):
        zero = np.zeros(xs.shape)
        acc = (zero, zero, zero, zero)
    else:
        p = term.paint
        bottom = denote_many(term.bottom, xs, ys)
        top = filter_channels(p.filter, denote_many(term.top, xs, ys))
        acc = blend_channels(p.blend, bottom, top)
    for d in reversed(chain):
        p = d.paint
        inside = shape_contains_many(d.shape, xs, ys)
        if inside.any():
            fill = fill_channels(p.fill, xs, ys)
            src = tuple(np.where(inside, c, 0.0) for c in fill)
        else:
            zero = np.zeros(xs.shape)
            src = (zero, zero, zero, zero)
        acc = blend_channels(p.blend, acc, filter_channels(p.filter, src))
    return acc


def clip_all(term: LayerTerm, m: Shape) -> LayerTerm:
    """Intersect every drawn shape in a BlendLayer-free term with ``m``."""
    chain = []
    while isinstance(term, DrawShape):
        chain.append(term)
        term = term.base
    if isinstance(term, BlendLayer):
        raise ClipAllError("clip_all is undefined on BlendLayer terms")
    out: LayerTerm = EMPTY
    for d in reversed(chain):
        out = DrawShape(out, shape_intersect(d.shape, m), d.paint)
    return out


def term_shapes(term: LayerTerm) -> Iterable[Shape]:
    stack = [term]
    while stack:
        t = stack.pop()
        if isinstance(t, DrawShape):
            yield t.shape
            stack.append(t.base)
        elif isinstance(t, BlendLayer):
            stack.append(t.bottom)
            stack.append(t.top)


@dataclass
class SampleSet:
    xs: np.ndarray
    ys: np.ndarray
    n_adversarial: int = field(default=0)

    def __len__(self):
        return len(self.xs)


def sample_points(
    terms: Sequence[LayerTerm],
    n_random: int = 4096,
    seed: int = 0,
    bounds: tuple = (0.0, 0.0, 256.0, 256.0),
    delta: float = 1e-3,
) -> SampleSet:
    """Adversarial boundary points of every shape plus seeded uniform points.

    Each shape key point contributes itself and its eight ``delta``
    neighbours, since rewrites that go wrong tend to go wrong at edges.
    """
    corners = set()
    for t in terms:
        for s in term_shapes(t):
            for x, y in key_points(s):
                corners.add((x, y))
    offsets = (-delta, 0.0, delta)
    adv = sorted({(x + dx, y + dy) for x, y in corners for dx in offsets for dy in offsets})
    rng = np.random.default_rng(seed)
    left, top, right, bottom = bounds
    rx = rng.uniform(left, right, n_random)
    ry = rng.uniform(top, bottom, n_random)
    ax = np.array([p[0] for p in adv], dtype=float)
    ay = np.array([p[1] for p in adv], dtype=float)
    return SampleSet(np.concatenate([ax, rx]), np.concatenate([ay, ry]), len(adv))


@dataclass
class EquivResult:
    equivalent: bool
    max_delta: float
    witness: Point | None = None
    witness_delta: tuple | None = None

    def __bool__(self):
        return self.equivalent


def layer_equiv_sampled(a: LayerTerm, b: LayerTerm, points: SampleSet | None = None,
                        tol: float = 1e-9) -> EquivResult:
    """Compare two terms channel-wise over a sample set.

    Structurally equal terms short-circuit to equivalent.  On failure the
    result carries the worst sample point and its per-channel deltas.
    """
    if a == b:
        return EquivResult(True, 0.0)
    if points is None:
        points = sample_points([a, b])
    ca = np.stack(denote_many(a, points.xs, points.ys))
    cb = np.stack(denote_many(b, points.xs, points.ys))
    diff = np.abs(ca - cb)
    per_point = diff.max(axis=0) if diff.size else np.zeros(0)
    if per_point.size == 0:
        return EquivResult(True, 0.0)
    worst = int(np.argmax(per_point))
    max_delta = float(per_point[worst])
    if max_delta <= tol:
        return EquivResult(True, max_delta)
    pt = Point(float(points.xs[worst]), float(points.ys[worst]))
    return EquivResult(False, max_delta, pt, tuple(float(v) for v in diff[:, worst]))
