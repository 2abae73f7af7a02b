"""Shapes as point predicates over a small closed geometry term language."""
from __future__ import annotations

import math
from dataclasses import dataclass
import typing
from typing import Iterator, Optional

import numpy as np

from .color import Point


@dataclass(frozen=True)
class Rect:
    """Half-open box: ``left <= x < right`` and ``top <= y < bottom``."""

    left: float
    top: float
    right: float
    bottom: float

    def __post_init__(self):
        if not (self.left <= self.right and self.top <= self.bottom):
            raise ValueError(f"inverted rect {self!r}")

    @property
    def area(self) -> float:
        return (self.right - self.left) * (self.bottom - self.top)


@dataclass(frozen=True)
class Circle:
    center: Point
    radius: float

    def __post_init__(self):
        if not self.radius >= 0:
            raise ValueError(f"negative radius {self.radius!r}")


@dataclass(frozen=True)
class Intersect:
    lhs: "Shape"
    rhs: "Shape"


@dataclass(frozen=True)
class Union:
    lhs: "Shape"
    rhs: "Shape"


@dataclass(frozen=True)
class Full:
    pass


@dataclass(frozen=True)
class EmptyShape:
    pass


FULL = Full()
EMPTY_SHAPE = EmptyShape()

Shape = typing.Union[Rect, Circle, Intersect, Union, Full, EmptyShape]


def shape_contains(s: Shape, pt: Point) -> bool:
    x, y = pt
    if isinstance(s, Rect):
        return s.left <= x < s.right and s.top <= y < s.bottom
    if isinstance(s, Circle):
        dx, dy = x - s.center[0], y - s.center[1]
        return dx * dx + dy * dy <= s.radius * s.radius
    if isinstance(s, Intersect):
        return shape_contains(s.lhs, pt) and shape_contains(s.rhs, pt)
    if isinstance(s, Union):
        return shape_contains(s.lhs, pt) or shape_contains(s.rhs, pt)
    if isinstance(s, Full):
        return True
    if isinstance(s, EmptyShape):
        return False
    raise TypeError(f"not a shape: {s!r}")


def shape_contains_many(s: Shape, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Vectorized membership; same comparisons as :func:`shape_contains`."""
    if isinstance(s, Rect):
        return (s.left <= xs) & (xs < s.right) & (s.top <= ys) & (ys < s.bottom)
    if isinstance(s, Circle):
        dx, dy = xs - s.center[0], ys - s.center[1]
        return dx * dx + dy * dy <= s.radius * s.radius
    if isinstance(s, Intersect):
        return shape_contains_many(s.lhs, xs, ys) & shape_contains_many(s.rhs, xs, ys)
    if isinstance(s, Union):
        return shape_contains_many(s.lhs, xs, ys) | shape_contains_many(s.rhs, xs, ys)
    if isinstance(s, Full):
        return np.ones(xs.shape, dtype=bool)
    if isinstance(s, EmptyShape):
        return np.zeros(xs.shape, dtype=bool)
    raise TypeError(f"not a shape: {s!r}")


def shape_intersect(a: Shape, b: Shape) -> Shape:
    if isinstance(a, Full):
        return b
    if isinstance(b, Full):
        return a
    if isinstance(a, EmptyShape) or isinstance(b, EmptyShape):
        return EMPTY_SHAPE
    if isinstance(a, Rect) and isinstance(b, Rect):
        left, top = max(a.left, b.left), max(a.top, b.top)
        right, bottom = min(a.right, b.right), min(a.bottom, b.bottom)
        if left >= right or top >= bottom:
            return EMPTY_SHAPE
        return Rect(left, top, right, bottom)
    return Intersect(a, b)


def _bounds(s: Shape) -> tuple[Optional[Rect], bool]:
    # (box or None when unbounded, provably empty)
    if isinstance(s, Rect):
        return s, s.left == s.right or s.top == s.bottom
    if isinstance(s, Circle):
        (cx, cy), r = s.center, s.radius
        return Rect(cx - r, cy - r, cx + r, cy + r), False
    if isinstance(s, Full):
        return None, False
    if isinstance(s, EmptyShape):
        return _NOWHERE, True
    (lb, le), (rb, re_) = _bounds(s.lhs), _bounds(s.rhs)
    if isinstance(s, Intersect):
        if le or re_:
            return _NOWHERE, True
        if lb is None:
            return rb, False
        if rb is None:
            return lb, False
        left, top = max(lb.left, rb.left), max(lb.top, rb.top)
        right, bottom = min(lb.right, rb.right), min(lb.bottom, rb.bottom)
        if left > right or top > bottom:
            return _NOWHERE, True
        return Rect(left, top, right, bottom), False
    if le:
        return rb, re_
    if re_:
        return lb, False
    if lb is None or rb is None:
        return None, False
    return Rect(min(lb.left, rb.left), min(lb.top, rb.top),
                max(lb.right, rb.right), max(lb.bottom, rb.bottom)), False


_NOWHERE = Rect(0.0, 0.0, 0.0, 0.0)


def shape_bounds(s: Shape) -> Optional[Rect]:
    """Conservative bounding box, or ``None`` when unbounded.

    Provably empty shapes report a degenerate box at the origin.
    """
    return _bounds(s)[0]


def shape_is_empty(s: Shape) -> bool:
    """Conservative emptiness: True only when no point can be a member."""
    return _bounds(s)[1]


def bounds_contains(box: Optional[Rect], pt: Point) -> bool:
    """Closed-box test used for checking :func:`shape_bounds` soundness."""
    if box is None:
        return True
    return box.left <= pt[0] <= box.right and box.top <= pt[1] <= box.bottom


def normalize_shape(s: Shape) -> Shape:
    """Canonical form: zero-area rects become empty, intersections fold.

    A zero-radius circle still contains its center, so it is kept.
    """
    if isinstance(s, Rect):
        return EMPTY_SHAPE if s.left == s.right or s.top == s.bottom else s
    if isinstance(s, Intersect):
        return shape_intersect(normalize_shape(s.lhs), normalize_shape(s.rhs))
    if isinstance(s, Union):
        lhs, rhs = normalize_shape(s.lhs), normalize_shape(s.rhs)
        if isinstance(lhs, EmptyShape):
            return rhs
        if isinstance(rhs, EmptyShape):
            return lhs
        if isinstance(lhs, Full) or isinstance(rhs, Full):
            return FULL
        return Union(lhs, rhs)
    return s


def key_points(s: Shape) -> Iterator[Point]:
    """Corners and extreme points of every leaf; boundary sampling seeds."""
    if isinstance(s, Rect):
        for x in (s.left, s.right):
            for y in (s.top, s.bottom):
                yield Point(x, y)
    elif isinstance(s, Circle):
        (cx, cy), r = s.center, s.radius
        yield Point(cx, cy)
        yield Point(cx - r, cy)
        yield Point(cx + r, cy)
        yield Point(cx, cy - r)
        yield Point(cx, cy + r)
        d = r / math.sqrt(2.0)
        yield Point(cx + d, cy + d)
        yield Point(cx - d, cy - d)
    elif isinstance(s, (Intersect, Union)):
        yield from key_points(s.lhs)
        yield from key_points(s.rhs)
