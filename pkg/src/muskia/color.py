"""Colors, points, fills, blends and filters.

Colors are premultiplied ARGB tuples of reals.  The channel-level helpers
(``blend_channels``, ``filter_channels``, ``fill_channels``) accept either
Python floats or numpy arrays and perform the exact same sequence of IEEE
operations in both cases, so scalar and vectorized evaluation agree bit for
bit.
"""
from __future__ import annotations

import bisect
import enum
import math
from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np

#: Alpha at or above ``1 - OPAQUE_EPS`` counts as opaque.
OPAQUE_EPS = 1e-6

LUMA_R = 0.2126
LUMA_G = 0.7152
LUMA_B = 0.0722


class Point(NamedTuple):
    x: float
    y: float


class Color(NamedTuple):
    """Premultiplied ARGB color: ``0 <= a <= 1`` and ``0 <= r, g, b <= a``."""

    a: float
    r: float
    g: float
    b: float

    def is_valid(self, slack: float = 0.0) -> bool:
        a, r, g, b = self
        if not all(math.isfinite(v) for v in self):
            return False
        if a < -slack or a > 1.0 + slack:
            return False
        return all(-slack <= c <= a + slack for c in (r, g, b))

    @classmethod
    def from_unpremultiplied(cls, a: float, r: float, g: float, b: float) -> "Color":
        return cls(a, r * a, g * a, b * a)


TRANSPARENT = Color(0.0, 0.0, 0.0, 0.0)
OPAQUE_BLACK = Color(1.0, 0.0, 0.0, 0.0)
OPAQUE_WHITE = Color(1.0, 1.0, 1.0, 1.0)


class BlendMode(enum.Enum):
    SRC_OVER = "srcOver"
    DST_IN = "dstIn"
    MULTIPLY = "multiply"
    SRC_OUT = "srcOut"


class FilterKind(enum.Enum):
    ID = "id"
    LUMA = "luma"


# ---------------------------------------------------------------------------
# Fills
# ---------------------------------------------------------------------------

Stop = tuple  # (offset, Color)


@dataclass(frozen=True)
class Solid:
    color: Color


@dataclass(frozen=True)
class LinearGradient:
    p0: Point
    p1: Point
    stops: tuple  # tuple[tuple[float, Color], ...]


@dataclass(frozen=True)
class RadialGradient:
    center: Point
    radius: float
    stops: tuple


Image = Union[Solid, LinearGradient, RadialGradient]


# ---------------------------------------------------------------------------
# Channel arithmetic shared by scalar and array evaluation
# ---------------------------------------------------------------------------

def _minimum(x, y):
    if isinstance(x, np.ndarray) or isinstance(y, np.ndarray):
        return np.minimum(x, y)
    return x if x <= y else y


def blend_channels(mode: BlendMode, dst, src):
    """Blend ``src`` onto ``dst``; both are ``(a, r, g, b)`` channel tuples."""
    da, dr, dg, db = dst
    sa, sr, sg, sb = src
    if mode is BlendMode.SRC_OVER:
        k = 1.0 - sa
        return (sa + da * k, sr + dr * k, sg + dg * k, sb + db * k)
    if mode is BlendMode.DST_IN:
        return (da * sa, dr * sa, dg * sa, db * sa)
    if mode is BlendMode.SRC_OUT:
        k = 1.0 - da
        return (sa * k, sr * k, sg * k, sb * k)
    if mode is BlendMode.MULTIPLY:
        ks = 1.0 - sa
        kd = 1.0 - da
        a = sa + da * ks
        # the three-term sum can overshoot alpha by an ulp
        return (
            a,
            _minimum(sr * dr + sr * kd + dr * ks, a),
            _minimum(sg * dg + sg * kd + dg * ks, a),
            _minimum(sb * db + sb * kd + db * ks, a),
        )
    raise ValueError(f"unknown blend mode {mode!r}")


def filter_channels(kind: FilterKind, c):
    if kind is FilterKind.ID:
        return c
    if kind is FilterKind.LUMA:
        a, r, g, b = c
        y = _minimum(LUMA_R * r + LUMA_G * g + LUMA_B * b, a)
        zero = r * 0.0
        return (y, zero, zero, zero)
    raise ValueError(f"unknown filter {kind!r}")


def _interpolate(stops, t):
    """Piecewise-linear interpolation of premultiplied stop colors at ``t``."""
    offsets = [s[0] for s in stops]
    n = len(stops)
    if n == 1:
        return tuple(stops[0][1])
    if isinstance(t, np.ndarray):
        k = np.searchsorted(np.asarray(offsets), t, side="right") - 1
        k = np.clip(k, 0, n - 2)
        o = np.asarray(offsets)
        cols = np.asarray([tuple(s[1]) for s in stops])
        o0, o1 = o[k], o[k + 1]
        span = o1 - o0
        degenerate = span <= 0.0
        u = np.where(degenerate, 1.0, (t - o0) / np.where(degenerate, 1.0, span))
        c0, c1 = cols[k], cols[k + 1]
        return tuple(c0[..., j] + (c1[..., j] - c0[..., j]) * u for j in range(4))
    k = bisect.bisect_right(offsets, t) - 1
    k = min(max(k, 0), n - 2)
    o0, o1 = offsets[k], offsets[k + 1]
    span = o1 - o0
    u = 1.0 if span <= 0.0 else (t - o0) / span
    c0, c1 = stops[k][1], stops[k + 1][1]
    return tuple(c0[j] + (c1[j] - c0[j]) * u for j in range(4))


def _clamp01(t):
    if isinstance(t, np.ndarray):
        return np.clip(t, 0.0, 1.0)
    return min(max(t, 0.0), 1.0)


def fill_channels(img: Image, x, y):
    """Evaluate a fill at ``(x, y)``; coordinates may be floats or arrays."""
    if isinstance(img, Solid):
        c = img.color
        if isinstance(x, np.ndarray):
            return tuple(np.full(x.shape, v) for v in c)
        return tuple(c)
    if isinstance(img, LinearGradient):
        (x0, y0), (x1, y1) = img.p0, img.p1
        dx, dy = x1 - x0, y1 - y0
        t = ((x - x0) * dx + (y - y0) * dy) / (dx * dx + dy * dy)
        return _interpolate(img.stops, _clamp01(t))
    if isinstance(img, RadialGradient):
        ex, ey = x - img.center[0], y - img.center[1]
        d2 = ex * ex + ey * ey
        d = np.sqrt(d2) if isinstance(d2, np.ndarray) else math.sqrt(d2)
        return _interpolate(img.stops, _clamp01(d / img.radius))
    raise TypeError(f"not a fill: {img!r}")


# ---------------------------------------------------------------------------
# Public scalar operations
# ---------------------------------------------------------------------------

def blend_eval(mode: BlendMode, dst: Color, src: Color) -> Color:
    """Blend ``src`` (top) onto ``dst`` (bottom)."""
    return Color(*blend_channels(mode, dst, src))


def filter_eval(kind: FilterKind, c: Color) -> Color:
    return Color(*filter_channels(kind, c))


def fill_eval(img: Image, pt: Point) -> Color:
    return Color(*fill_channels(img, pt[0], pt[1]))


def is_opaque(c: Color) -> bool:
    return c.a >= 1.0 - OPAQUE_EPS


def gradient_all_stops_opaque(img: Image) -> bool:
    """True when every color the fill can produce is opaque.

    A solid fill counts as a one-stop gradient.
    """
    if isinstance(img, Solid):
        return is_opaque(img.color)
    return all(is_opaque(c) for _, c in img.stops)


def is_gradient(img: Image) -> bool:
    return isinstance(img, (LinearGradient, RadialGradient))
