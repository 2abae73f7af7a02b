import os

import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from muskia.color import BlendMode, Color, FilterKind, LinearGradient, Point, RadialGradient, Solid
from muskia.commands import RESTORE, SAVE, Clip, Draw, Program, SaveLayer
from muskia.layers import Paint
from muskia.shapes import EMPTY_SHAPE, FULL, Circle, Intersect, Rect, Union

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=200, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


unit = st.floats(0.0, 1.0, allow_nan=False)


@st.composite
def colors(draw, opaque=None):
    if opaque is True:
        a = 1.0
    elif opaque is False:
        a = draw(st.floats(0.0, 0.99))
    else:
        a = draw(st.one_of(st.just(1.0), st.just(0.0), unit))
    return Color(a, draw(unit) * a, draw(unit) * a, draw(unit) * a)


coord = st.integers(0, 64).map(lambda v: v / 2)


@st.composite
def rects(draw):
    l, r = sorted((draw(coord), draw(coord)))
    t, b = sorted((draw(coord), draw(coord)))
    return Rect(l, t, r, b)


@st.composite
def circles(draw):
    return Circle(Point(draw(coord), draw(coord)), draw(st.integers(0, 24)) / 2)


leaf_shapes = st.one_of(rects(), circles(), st.just(FULL), st.just(EMPTY_SHAPE))
shapes = st.recursive(
    leaf_shapes,
    lambda inner: st.one_of(st.builds(Intersect, inner, inner), st.builds(Union, inner, inner)),
    max_leaves=6,
)


@st.composite
def stops(draw, opaque=None):
    n = draw(st.integers(1, 4))
    inner = sorted(draw(st.lists(unit, min_size=n - 1, max_size=n - 1))) if n > 1 else []
    offsets = [0.0, *inner[: max(n - 2, 0)], 1.0] if n > 1 else [0.0]
    return tuple((o, draw(colors(opaque))) for o in offsets)


@st.composite
def fills(draw, opaque=None):
    kind = draw(st.sampled_from(("solid", "solid", "linear", "radial")))
    if kind == "solid":
        return Solid(draw(colors(opaque)))
    if kind == "linear":
        p0 = Point(draw(coord), draw(coord))
        p1 = Point(draw(coord), draw(coord))
        if p0 == p1:
            p1 = Point(p0.x + 1.0, p0.y)
        return LinearGradient(p0, p1, draw(stops(opaque)))
    return RadialGradient(Point(draw(coord), draw(coord)), draw(st.integers(1, 40)) / 2,
                          draw(stops(opaque)))


blends = st.sampled_from(list(BlendMode))
filters = st.sampled_from(list(FilterKind))


@st.composite
def paints(draw, blend=None, filt=None, opaque=None):
    return Paint(draw(fills(opaque)),
                 filt if filt is not None else draw(filters),
                 blend if blend is not None else draw(blends))


def _leaf_commands():
    return st.one_of(
        st.builds(Draw, shapes, paints()),
        st.builds(Clip, shapes),
    ).map(lambda c: [c])


def _bracket(inner):
    opener = st.one_of(st.just(SAVE), st.builds(SaveLayer, paints()))
    body = st.lists(inner, max_size=4).map(lambda xs: [c for x in xs for c in x])
    return st.tuples(opener, body).map(lambda t: [t[0], *t[1], RESTORE])


command_lists = st.recursive(_leaf_commands(), _bracket, max_leaves=12)


@st.composite
def programs(draw, max_parts=5):
    parts = draw(st.lists(command_lists, max_size=max_parts))
    return Program(c for p in parts for c in p)


RED = Color(1.0, 1.0, 0.0, 0.0)
BLUE = Color(1.0, 0.0, 0.0, 1.0)
WHITE = Color(1.0, 1.0, 1.0, 1.0)
BLACK = Color(1.0, 0.0, 0.0, 0.0)


def solid(c, blend=BlendMode.SRC_OVER, filt=FilterKind.ID):
    return Paint(Solid(c), filt, blend)


@pytest.fixture
def tmp_cwd(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


def pinterest_program():
    """A luminance mask layer inside a DstIn layer inside an opaque SrcOver layer."""
    return Program([
        Draw(Rect(0, 0, 32, 32), solid(BLUE)),
        SaveLayer(solid(BLACK)),
        Draw(Rect(4, 4, 28, 20), solid(RED)),
        Draw(Circle(Point(16, 16), 6), solid(Color(0.5, 0.0, 0.25, 0.5))),
        SaveLayer(solid(BLACK, BlendMode.DST_IN)),
        SaveLayer(solid(BLACK, BlendMode.SRC_OVER, FilterKind.LUMA)),
        Draw(Rect(8, 0, 24, 32), solid(WHITE)),
        RESTORE,
        RESTORE,
        RESTORE,
    ])


# ---------------------------------------------------------------------------
# Acceptance summary
# ---------------------------------------------------------------------------

CRITERIA = ("1", "2", "3", "4", "5", "6", "7", "8")
_criteria: dict = {}


def record_criterion(criterion, ok: bool, detail: str) -> None:
    """Store one acceptance outcome; sub-parts like ``7a`` roll up into ``7``."""
    key = str(criterion)
    _criteria[key] = (ok, detail)
    print(f"criterion {key}: {'PASS' if ok else 'FAIL'} {detail}")


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for c in CRITERIA:
        parts = sorted(k for k in _criteria if k.rstrip("abc") == c)
        if not parts:
            terminalreporter.write_line(f"criterion {c}: FAIL (did not run to completion)")
            continue
        ok = all(_criteria[k][0] for k in parts)
        detail = "; ".join(f"{k}: {_criteria[k][1]}" if len(parts) > 1 else _criteria[k][1]
                           for k in parts)
        terminalreporter.write_line(f"criterion {c}: {'PASS' if ok else 'FAIL'}  {detail}")
