"""Seeded program corpus with ground-truth rewrite annotations.

Pattern families contain instances of the four rewrites (alone, inside
context layers, or cascading); near-miss families break exactly one side
condition; ``random`` programs are unstructured.  Every program is in the
normalized form that skp-lite round-trips exactly.
"""
from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Callable, Optional

from .color import BlendMode, Color, FilterKind, LinearGradient, Point, RadialGradient, Solid
from .commands import RESTORE, SAVE, Clip, Draw, Program, SaveLayer
from .layers import Paint
from .optimizer.rewrites import DSTIN, GRADIENT, LUMA, SRCOVER
from .shapes import Circle, Intersect, Rect, Union
from .skplite import normalize_program

PATTERN_FAMILIES = ("srcover", "dstin", "luma", "gradient")
NEAR_MISS_FAMILIES = ("srcover_near", "dstin_near", "luma_near", "gradient_near")
FAMILIES = PATTERN_FAMILIES + NEAR_MISS_FAMILIES + ("random",)

DEFAULT_MIX = {f: 1.0 for f in FAMILIES}

SO = BlendMode.SRC_OVER
DST_IN = BlendMode.DST_IN
ID = FilterKind.ID
LUMA_F = FilterKind.LUMA
CONTEXT_BLENDS = (BlendMode.MULTIPLY, BlendMode.SRC_OUT)


@dataclass(frozen=True)
class CorpusEntry:
    name: str
    family: str
    variant: str
    program: Program
    expected: Optional[dict]   # pass name -> firings; None when not annotated

    def expected_total(self) -> Optional[int]:
        return None if self.expected is None else sum(self.expected.values())


class _Gen:
    """Random building blocks within a ``size`` x ``size`` canvas."""

    def __init__(self, rng: random.Random, size: int):
        self.rng = rng
        self.size = size

    def coord(self) -> float:
        return self.rng.randint(0, 2 * self.size) / 2

    def color(self, opaque: bool = False, max_channel: float = 1.0) -> Color:
        a = 1.0 if opaque else self.rng.choice((1.0, self.rng.uniform(0.2, 1.0)))
        r, g, b = (self.rng.uniform(0.0, max_channel) for _ in range(3))
        return Color.from_unpremultiplied(a, r, g, b)

    def rect(self, min_side: float = 8.0) -> Rect:
        while True:
            l, r = sorted((self.coord(), self.coord()))
            t, b = sorted((self.coord(), self.coord()))
            if r - l >= min_side and b - t >= min_side:
                return Rect(l, t, r, b)

    def circle(self) -> Circle:
        c = Point(self.coord(), self.coord())
        return Circle(c, self.rng.randint(8, self.size // 2) / 2 + 4)

    def shape(self):
        k = self.rng.random()
        if k < 0.6:
            return self.rect()
        if k < 0.85:
            return self.circle()
        lhs, rhs = self.rect(), self.circle()
        return Intersect(lhs, rhs) if self.rng.random() < 0.5 else Union(lhs, rhs)

    def stops(self, opaque: bool) -> tuple:
        n = self.rng.randint(2, 4)
        inner = sorted(self.rng.random() for _ in range(n - 2))
        offsets = [0.0, *inner, 1.0]
        return tuple((o, self.color(opaque=opaque)) for o in offsets)

    def gradient(self, opaque: bool):
        if self.rng.random() < 0.5:
            while True:
                p0 = Point(self.coord(), self.coord())
                p1 = Point(self.coord(), self.coord())
                if p0 != p1:
                    return LinearGradient(p0, p1, self.stops(opaque))
        return RadialGradient(Point(self.coord(), self.coord()),
                              self.rng.randint(8, self.size) / 2, self.stops(opaque))

    def fill(self, opaque: bool = False):
        if self.rng.random() < 0.75:
            return Solid(self.color(opaque))
        return self.gradient(opaque)

    def blend(self) -> BlendMode:
        return self.rng.choice(tuple(BlendMode))

    def draw(self, blend: BlendMode = SO, filt: Optional[FilterKind] = None, fill=None) -> Draw:
        if filt is None:
            filt = LUMA_F if self.rng.random() < 0.1 else ID
        return Draw(self.shape(), Paint(fill or self.fill(), filt, blend))

    def any_draw(self) -> Draw:
        return self.draw(self.blend())

    def draws(self, lo: int, hi: int, blend: Optional[BlendMode] = SO) -> list:
        return [self.draw(blend) if blend else self.any_draw()
                for _ in range(self.rng.randint(lo, hi))]

    def opaque_layer_paint(self) -> Paint:
        return Paint(self.fill(opaque=True), ID, SO)

    def context_paint(self) -> Paint:
        return Paint(self.fill(), self.rng.choice((ID, LUMA_F)), self.rng.choice(CONTEXT_BLENDS))

    def srcover_body(self, allow_top_clip: bool = True) -> list:
        """SrcOver-only content: draws, clips and plain Save groups."""
        out = []
        for _ in range(self.rng.randint(1, 4)):
            k = self.rng.random()
            if k < 0.6:
                out.append(self.draw(SO))
            elif k < 0.75 and allow_top_clip:
                out.append(Clip(self.shape()))
            else:
                out += [SAVE, Clip(self.shape()), *self.draws(1, 2), RESTORE]
        if not any(isinstance(r, Draw) for r in out):
            out.append(self.draw(SO))
        return out


# ---------------------------------------------------------------------------
# Pattern families
# ---------------------------------------------------------------------------

def _srcover(g: _Gen) -> tuple:
    variant = g.rng.choice(("plain", "nested", "in_context"))
    layer = [SaveLayer(g.opaque_layer_paint()), *g.srcover_body(), RESTORE]
    if variant == "plain":
        recs = g.draws(0, 2, None) + layer + g.draws(0, 2, None)
        return variant, recs, {SRCOVER: 1}
    if variant == "nested":
        recs = [SaveLayer(g.opaque_layer_paint()), *g.draws(0, 2), *layer, *g.draws(0, 2), RESTORE]
        return variant, g.draws(0, 1, None) + recs, {SRCOVER: 2}
    recs = [SaveLayer(g.context_paint()), *g.draws(0, 2, None), *layer, RESTORE]
    return variant, g.draws(0, 2, None) + recs, {SRCOVER: 1}


def _l1(g: _Gen) -> list:
    return g.srcover_body(allow_top_clip=False)


def _mask(g: _Gen, alpha: float = 1.0, draws: int = 1) -> list:
    clips = [Clip(g.shape()) for _ in range(g.rng.randint(0, 2))]
    if alpha == 1.0 and g.rng.random() < 0.15:
        fill, filt = Solid(Color(1.0, 1.0, 1.0, 1.0)), LUMA_F
    else:
        c = g.color(opaque=True)
        fill, filt = Solid(Color(alpha, c.r * alpha, c.g * alpha, c.b * alpha)), ID
    body = [Draw(g.shape(), Paint(fill, filt, SO)) for _ in range(draws)]
    return [SaveLayer(Paint(g.fill(), ID, DST_IN)), *clips, *body, RESTORE]


def _dstin(g: _Gen) -> tuple:
    variant = g.rng.choice(("program_scope", "in_context", "in_opaque_layer"))
    scope = _l1(g) + _mask(g)
    if variant == "program_scope":
        return variant, scope, {DSTIN: 1}
    if variant == "in_context":
        recs = g.draws(0, 2, None) + [SaveLayer(g.context_paint()), *scope, RESTORE] + g.draws(0, 2, None)
        return variant, recs, {DSTIN: 1}
    recs = g.draws(0, 2, None) + [SaveLayer(g.opaque_layer_paint()), *scope, RESTORE]
    return variant, recs, {DSTIN: 1, SRCOVER: 1}


def _luma_block(g: _Gen, color: Color, draws: int = 1, clip_first: bool = False,
                inner_blend: BlendMode = SO) -> list:
    inner = [Draw(g.shape(), Paint(Solid(color), ID, SO)) for _ in range(draws)]
    if clip_first:
        inner.insert(0, Clip(g.shape()))
    return [SaveLayer(Paint(g.fill(), ID, DST_IN)),
            SaveLayer(Paint(g.fill(), LUMA_F, inner_blend)), *inner, RESTORE, RESTORE]


def _dim_color(g: _Gen) -> Color:
    # keeps the luminance well below opaque so no DstIn rewrite follows
    return g.color(max_channel=0.9)


def pinterest_nest(g: _Gen) -> list:
    """Luminance layer inside a DstIn mask inside an opaque SrcOver layer."""
    white = Color(1.0, 1.0, 1.0, 1.0)
    return [SaveLayer(g.opaque_layer_paint()), *_l1(g), *_luma_block(g, white), RESTORE]


def _luma(g: _Gen) -> tuple:
    variant = g.rng.choice(("plain", "in_context", "nest", "nest_clipped"))
    if variant == "plain":
        return variant, g.draws(0, 3, None) + _luma_block(g, _dim_color(g)), {LUMA: 1}
    if variant == "in_context":
        recs = [SaveLayer(g.context_paint()), *g.draws(0, 2, None),
                *_luma_block(g, _dim_color(g)), RESTORE]
        return variant, g.draws(0, 2, None) + recs, {LUMA: 1}
    if variant == "nest":
        return variant, g.draws(0, 2, None) + pinterest_nest(g), {LUMA: 1, DSTIN: 1, SRCOVER: 1}
    # a top-level clip in l1 blocks the DstIn rewrite, which keeps the outer layer alive
    white = Color(1.0, 1.0, 1.0, 1.0)
    recs = [SaveLayer(g.opaque_layer_paint()), g.draw(SO), Clip(g.shape()), *g.draws(0, 1),
            *_luma_block(g, white), RESTORE]
    return variant, recs, {LUMA: 1}


def _gradient_pattern(g: _Gen, opaque: bool = True, same_shape: bool = True) -> list:
    s = g.shape()
    anchor = Draw(s, Paint(g.fill(), g.rng.choice((ID, LUMA_F)), SO))
    mask_shape = s if same_shape else g.rect()
    mask = Draw(mask_shape, Paint(g.gradient(opaque), ID, SO))
    return [anchor, SaveLayer(Paint(g.fill(), ID, DST_IN)), mask, RESTORE]


def _gradient(g: _Gen) -> tuple:
    variant = g.rng.choice(("program_start", "in_context", "in_opaque_layer"))
    if variant == "program_start":
        return variant, _gradient_pattern(g) + g.draws(0, 3, None), {GRADIENT: 1}
    if variant == "in_context":
        recs = [SaveLayer(g.context_paint()), *_gradient_pattern(g), *g.draws(0, 2, None), RESTORE]
        return variant, g.draws(0, 2, None) + recs, {GRADIENT: 1}
    recs = [SaveLayer(g.opaque_layer_paint()), *_gradient_pattern(g), *g.draws(0, 2), RESTORE]
    return variant, g.draws(0, 2, None) + recs, {GRADIENT: 1, SRCOVER: 1}


# ---------------------------------------------------------------------------
# Near misses: each breaks one side condition, so nothing fires
# ---------------------------------------------------------------------------

def _srcover_near(g: _Gen) -> tuple:
    variant = g.rng.choice(("non_srcover_draw", "translucent_paint", "luma_layer"))
    body = g.srcover_body()
    paint = g.opaque_layer_paint()
    if variant == "non_srcover_draw":
        body.insert(g.rng.randint(0, len(body)),
                    g.draw(g.rng.choice((BlendMode.MULTIPLY, BlendMode.SRC_OUT, DST_IN))))
    elif variant == "translucent_paint":
        c = g.color(opaque=True)
        paint = Paint(Solid(Color(0.5, c.r * 0.5, c.g * 0.5, c.b * 0.5)), ID, SO)
    else:
        paint = Paint(paint.fill, LUMA_F, SO)
    recs = g.draws(0, 2, None) + [SaveLayer(paint), *body, RESTORE]
    return variant, recs, {}


def _dstin_near(g: _Gen) -> tuple:
    variant = g.rng.choice(("translucent_mask", "layer_in_l1", "two_mask_draws",
                            "non_srcover_l1", "clip_in_l1", "mask_not_last"))
    l1 = _l1(g)
    mask = _mask(g)
    tail: list = []
    if variant == "translucent_mask":
        mask = _mask(g, alpha=0.5)
    elif variant == "layer_in_l1":
        l1.insert(g.rng.randint(0, len(l1)), [SaveLayer(g.context_paint()), g.draw(SO), RESTORE])
        l1 = [r for item in l1 for r in (item if isinstance(item, list) else [item])]
    elif variant == "two_mask_draws":
        mask = _mask(g, draws=2)
    elif variant == "non_srcover_l1":
        l1.append(g.draw(g.rng.choice((BlendMode.MULTIPLY, BlendMode.SRC_OUT))))
    elif variant == "clip_in_l1":
        l1.insert(g.rng.choice((0, len(l1))), Clip(g.shape()))
    else:
        tail = [g.draw(SO)]
    recs = [SaveLayer(g.context_paint()), *l1, *mask, *tail, RESTORE]
    return variant, recs, {}


def _luma_near(g: _Gen) -> tuple:
    variant = g.rng.choice(("two_draws", "clip_in_inner", "inner_not_srcover", "gradient_fill"))
    c = _dim_color(g)
    if variant == "two_draws":
        block = _luma_block(g, c, draws=2)
    elif variant == "clip_in_inner":
        block = _luma_block(g, c, clip_first=True)
    elif variant == "inner_not_srcover":
        block = _luma_block(g, c, inner_blend=g.rng.choice(CONTEXT_BLENDS))
    else:
        block = _luma_block(g, c)
        d = block[2]
        block[2] = Draw(d.shape, Paint(g.gradient(opaque=True), ID, SO))
    return variant, g.draws(0, 2, None) + block, {}


def _gradient_near(g: _Gen) -> tuple:
    variant = g.rng.choice(("translucent_stop", "different_shape", "layer_already_drawn",
                            "luma_mask_layer"))
    if variant == "translucent_stop":
        pat = _gradient_pattern(g)
        m = pat[2]
        grad = m.paint.fill
        stops = list(grad.stops)
        k = g.rng.randrange(len(stops))
        o, c = stops[k]
        stops[k] = (o, Color(0.9, c.r * 0.9, c.g * 0.9, c.b * 0.9))
        if isinstance(grad, LinearGradient):
            grad = LinearGradient(grad.p0, grad.p1, tuple(stops))
        else:
            grad = RadialGradient(grad.center, grad.radius, tuple(stops))
        pat[2] = Draw(m.shape, Paint(grad, ID, SO))
        return variant, pat, {}
    if variant == "different_shape":
        return variant, _gradient_pattern(g, same_shape=False), {}
    if variant == "layer_already_drawn":
        return variant, [g.draw(SO), *_gradient_pattern(g)], {}
    pat = _gradient_pattern(g)
    pat[1] = SaveLayer(Paint(g.fill(), LUMA_F, DST_IN))
    return variant, pat, {}


# ---------------------------------------------------------------------------
# Unstructured
# ---------------------------------------------------------------------------

def random_program(g: _Gen, length: Optional[int] = None) -> list:
    n = length if length is not None else g.rng.randint(1, 24)
    recs: list = []
    open_ = 0
    while len(recs) + open_ < n or open_:
        remaining = n - len(recs) - open_
        k = g.rng.random()
        if open_ and (remaining <= 0 or k < 0.15):
            recs.append(RESTORE)
            open_ -= 1
        elif remaining >= 2 and k < 0.3:
            if g.rng.random() < 0.5:
                recs.append(SAVE)
            else:
                recs.append(SaveLayer(Paint(g.fill(opaque=g.rng.random() < 0.5),
                                            g.rng.choice((ID, ID, LUMA_F)), g.blend())))
            open_ += 1
        elif k < 0.45:
            recs.append(Clip(g.shape()))
        else:
            recs.append(g.any_draw())
    return recs


def _random(g: _Gen) -> tuple:
    return "random", random_program(g), None


GENERATORS: dict = {
    "srcover": _srcover,
    "dstin": _dstin,
    "luma": _luma,
    "gradient": _gradient,
    "srcover_near": _srcover_near,
    "dstin_near": _dstin_near,
    "luma_near": _luma_near,
    "gradient_near": _gradient_near,
    "random": _random,
}


def _allocate(count: int, mix: dict) -> list:
    """Largest-remainder split of ``count`` across families, in FAMILIES order."""
    fams = [f for f in FAMILIES if mix.get(f, 0) > 0]
    unknown = set(mix) - set(FAMILIES)
    if unknown:
        raise ValueError(f"unknown corpus families {sorted(unknown)}")
    if not fams:
        raise ValueError("mix assigns no weight to any family")
    total = sum(mix[f] for f in fams)
    quotas = [count * mix[f] / total for f in fams]
    counts = [int(q) for q in quotas]
    by_remainder = sorted(range(len(fams)), key=lambda k: (-(quotas[k] - counts[k]), k))
    for k in by_remainder[: count - sum(counts)]:
        counts[k] += 1
    return list(zip(fams, counts))


def make_entry(seed: int, family: str, index: int, size: int = 256) -> CorpusEntry:
    g = _Gen(random.Random(f"muskia:{seed}:{family}:{index}"), size)
    variant, recs, expected = GENERATORS[family](g)
    program = normalize_program(Program(recs))
    return CorpusEntry(f"{family}-{index:04d}", family, variant, program, expected)


def generate_corpus(seed: int, count: int, mix: Optional[dict] = None,
                    size: int = 256) -> list:
    """Deterministic corpus of ``count`` programs split across families by ``mix``."""
    out = []
    for family, n in _allocate(count, mix or DEFAULT_MIX):
        out.extend(make_entry(seed, family, k, size) for k in range(n))
    return out


def generate_buffer(n_records: int, seed: int = 0, size: int = 256,
                    mix: Optional[dict] = None) -> Program:
    """A long program built by concatenating corpus programs, cut to ``n_records``.

    Used for optimizer timing; patterns near the cut are simply left open
    and closed, so the result is always balanced.
    """
    mix = mix or DEFAULT_MIX
    fams = [f for f in FAMILIES if mix.get(f, 0) > 0]
    weights = [mix[f] for f in fams]
    rng = random.Random(f"muskia-buffer:{seed}")
    recs: list = []
    k = 0
    while len(recs) < n_records:
        family = rng.choices(fams, weights)[0]
        entry = make_entry(seed, family, 100000 + k, size)
        k += 1
        if len(recs) + len(entry.program) > n_records:
            g = _Gen(rng, size)
            while len(recs) < n_records:
                recs.append(g.draw(SO))
            break
        recs.extend(entry.program.records)
    return Program(recs)


Generator = Callable[[_Gen], tuple]
