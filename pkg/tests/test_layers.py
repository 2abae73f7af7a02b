import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import BLACK, BLUE, RED, colors, paints, rects, shapes, solid
from muskia.color import TRANSPARENT, BlendMode, Color, FilterKind, Point
from muskia.layers import (
    EMPTY,
    BlendLayer,
    ClipAllError,
    DrawShape,
    Paint,
    clip_all,
    denote,
    denote_many,
    layer_equiv_sampled,
    sample_points,
)
from muskia.shapes import FULL, Rect, shape_intersect

SO = BlendMode.SRC_OVER
ID_SO = solid(BLACK)


def draw_chain(draws):
    t = EMPTY
    for shape, paint in draws:
        t = DrawShape(t, shape, paint)
    return t


chains = st.lists(st.tuples(shapes, paints(blend=SO)), max_size=5).map(draw_chain)
any_chains = st.lists(st.tuples(shapes, paints()), max_size=5).map(draw_chain)


def test_empty_denotes_transparent():
    assert denote(EMPTY, Point(3, 4)) == TRANSPARENT


def test_draw_rect_inside_and_outside():
    t = DrawShape(EMPTY, Rect(0, 0, 10, 10), solid(RED))
    assert denote(t, Point(5, 5)) == RED
    assert denote(t, Point(20, 20)) == TRANSPARENT


def test_multiply_layers_make_black():
    red = DrawShape(EMPTY, Rect(0, 0, 10, 10), solid(RED))
    blue = DrawShape(EMPTY, Rect(5, 5, 15, 15), solid(BLUE))
    t = BlendLayer(red, blue, Paint(filter=FilterKind.ID, blend=BlendMode.MULTIPLY))
    assert denote(t, Point(7, 7)) == BLACK
    assert denote(t, Point(2, 2)) == RED


def test_blend_applies_outside_the_shape():
    # DstIn with a transparent source outside its shape erases the base there
    base = DrawShape(EMPTY, FULL, solid(RED))
    t = DrawShape(base, Rect(0, 0, 4, 4), solid(BLUE, BlendMode.DST_IN))
    assert denote(t, Point(1, 1)) == RED
    assert denote(t, Point(10, 10)) == TRANSPARENT


def test_clip_all_examples():
    m = Rect(2, 2, 6, 6)
    assert clip_all(EMPTY, m) == EMPTY
    d = DrawShape(EMPTY, Rect(0, 0, 3, 3), solid(RED))
    assert clip_all(d, FULL) == d
    with pytest.raises(ClipAllError):
        clip_all(BlendLayer(EMPTY, d, solid(RED)), m)


@given(st.lists(st.tuples(rects(), paints()), min_size=3, max_size=3), rects())
def test_clip_all_matches_manual_definition(draws, m):
    t = draw_chain(draws)
    manual = draw_chain([(shape_intersect(s, m), p) for s, p in draws])
    assert clip_all(t, m) == manual
    pts = sample_points([t, manual], n_random=1000, seed=1, bounds=(0, 0, 32, 32))
    assert layer_equiv_sampled(clip_all(t, m), manual, pts)


def test_equiv_examples():
    g = Rect(1, 1, 9, 9)
    c = Color(0.7, 0.1, 0.5, 0.2)
    d = DrawShape(EMPTY, g, solid(c))
    assert layer_equiv_sampled(d, d)
    wrapped = BlendLayer(EMPTY, d, solid(BLACK))
    assert layer_equiv_sampled(d, wrapped)
    res = layer_equiv_sampled(d, BlendLayer(EMPTY, d, solid(BLACK, BlendMode.DST_IN)))
    assert not res
    assert res.witness is not None and shape_contains_pt(g, res.witness)


def shape_contains_pt(g, pt):
    return g.left - 1e-2 <= pt.x <= g.right + 1e-2 and g.top - 1e-2 <= pt.y <= g.bottom + 1e-2


def test_multiply_wrapper_differs_from_plain_draw():
    # Multiply over transparent keeps the source, so a color whose result differs needs a base
    base = DrawShape(EMPTY, FULL, solid(RED))
    c = Color(1.0, 0.0, 1.0, 0.0)
    plain = DrawShape(base, Rect(0, 0, 8, 8), solid(c))
    inner = DrawShape(EMPTY, Rect(0, 0, 8, 8), solid(c))
    mult = BlendLayer(base, inner, solid(BLACK, BlendMode.MULTIPLY))
    assert denote(plain, Point(4, 4)) != denote(mult, Point(4, 4))
    assert not layer_equiv_sampled(plain, mult)


def test_sample_points_include_corner_neighbours():
    t = DrawShape(EMPTY, Rect(2, 3, 5, 7), solid(RED))
    pts = sample_points([t], n_random=10, seed=0)
    coords = set(zip(pts.xs.tolist(), pts.ys.tolist()))
    assert (2 - 1e-3, 3 - 1e-3) in coords and (5.0, 7.0) in coords
    assert len(pts) == pts.n_adversarial + 10


@given(any_chains, st.lists(st.tuples(st.floats(-2, 34), st.floats(-2, 34)), max_size=20))
def test_denote_many_matches_pointwise(t, pts):
    xs = np.array([p[0] for p in pts], dtype=float)
    ys = np.array([p[1] for p in pts], dtype=float)
    arr = denote_many(t, xs, ys)
    for k, (x, y) in enumerate(pts):
        assert tuple(float(c[k]) for c in arr) == tuple(denote(t, Point(x, y)))


@given(chains, chains, rects(), paints(blend=SO))
def test_peeling_equation(l1, l2, g, pd):
    layer_paint = Paint(solid(BLACK).fill, FilterKind.ID, SO)
    lhs = BlendLayer(l1, DrawShape(l2, g, pd), layer_paint)
    rhs = DrawShape(BlendLayer(l1, l2, layer_paint), g, pd)
    assert layer_equiv_sampled(lhs, rhs, tol=1e-9)


@given(chains, shapes, colors(opaque=True))
def test_dstin_mask_equals_clip_all(l1, m, c2):
    lhs = BlendLayer(l1, DrawShape(EMPTY, m, solid(c2)), solid(BLACK, BlendMode.DST_IN))
    assert layer_equiv_sampled(lhs, clip_all(l1, m), tol=1e-9)


@given(any_chains, any_chains, any_chains, paints(), st.booleans())
def test_substitution_in_context(ctx_base, a, ctx_top, p, on_top):
    # SrcOver onto an empty layer is a structurally different term with the same meaning
    b = BlendLayer(EMPTY, a, Paint(solid(BLACK).fill, FilterKind.ID, SO))
    pts = sample_points([a, b, ctx_base, ctx_top], n_random=300, seed=2, bounds=(0, 0, 32, 32))
    assert layer_equiv_sampled(a, b, pts, tol=1e-9)
    wrap = (lambda t: BlendLayer(ctx_base, t, p)) if on_top else (lambda t: BlendLayer(t, ctx_top, p))
    assert layer_equiv_sampled(wrap(a), wrap(b), pts, tol=1e-9)
