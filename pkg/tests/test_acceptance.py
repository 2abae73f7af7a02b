"""Acceptance criteria 1-8, each at its stated tolerance.

Every test records one PASS/FAIL line; the lines are printed in the terminal
summary (see ``pytest_terminal_summary`` in conftest.py).
"""
import bisect
import gc
import math
import time

import numpy as np
import pytest

from conftest import pinterest_program, record_criterion
from invalid_docs import INVALID_DOCS, as_bytes
from muskia.cli import bench_programs
from muskia.color import (
    BlendMode,
    Color,
    FilterKind,
    LinearGradient,
    RadialGradient,
    Solid,
    blend_channels,
    blend_eval,
    filter_channels,
    filter_eval,
)
from muskia.commands import Clip, Draw, NoOp, Restore, Save, SaveLayer
from muskia.corpus import NEAR_MISS_FAMILIES, PATTERN_FAMILIES, generate_buffer, generate_corpus
from muskia.mutate import NEAR_FAMILY, fault_suite, force_apply
from muskia.optimizer.buffer import RecordBuffer
from muskia.optimizer.harness import transform
from muskia.optimizer.metrics import cost_metrics
from muskia.optimizer.passes import PASSES
from muskia.optimizer.pipeline import OptimizeConfig, optimize
from muskia.optimizer.rewrites import PASS_ORDER
from muskia.raster import image_diff_ae, rasterize
from muskia.shapes import Circle, EmptyShape, Full, Intersect, Rect, Union
from muskia.skplite import load_program, save_program
from muskia.validator import REFUTED, SIDECHECK_FAILED, VALIDATED, ValidateConfig, validate_trace

pytestmark = pytest.mark.slow

SIZE = 256


def verdict(criterion, ok, detail):
    record_criterion(criterion, ok, detail)
    assert ok, f"criterion {criterion}: {detail}"


# ---------------------------------------------------------------------------
# 1. Blend algebra
# ---------------------------------------------------------------------------

def random_colors(rng, n):
    a = rng.random(n)
    a[rng.random(n) < 0.1] = 1.0
    a[rng.random(n) < 0.05] = 0.0
    return (a, rng.random(n) * a, rng.random(n) * a, rng.random(n) * a)


def test_criterion_1_blend_algebra():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    n = 100_000
    a, b, c = (random_colors(rng, n) for _ in range(3))
    so = BlendMode.SRC_OVER
    lhs = blend_channels(so, blend_channels(so, a, b), c)
    rhs = blend_channels(so, a, blend_channels(so, b, c))
    assoc = max(float(np.max(np.abs(x - y))) for x, y in zip(lhs, rhs))

    red, blue = Color(1.0, 1.0, 0.0, 0.0), Color(1.0, 0.0, 0.0, 1.0)
    multiply_black = blend_eval(BlendMode.MULTIPLY, red, blue) == Color(1.0, 0.0, 0.0, 0.0)

    opaque = (np.ones(n), rng.random(n), rng.random(n), rng.random(n))
    kept = blend_channels(BlendMode.DST_IN, a, opaque)
    dstin_identity = all(np.array_equal(x, y) for x, y in zip(kept, a))

    zero = tuple(np.zeros(n) for _ in range(4))
    luma = FilterKind.LUMA
    l1 = filter_channels(luma, blend_channels(so, zero, a))
    l2 = blend_channels(so, zero, filter_channels(luma, a))
    commute = max(float(np.max(np.abs(x - y))) for x, y in zip(l1, l2))

    witness = None
    for _ in range(1000):
        c1 = Color.from_unpremultiplied(*rng.random(4))
        c2 = Color.from_unpremultiplied(*rng.random(4))
        x = filter_eval(luma, blend_eval(so, c1, c2))
        y = blend_eval(so, filter_eval(luma, c1), filter_eval(luma, c2))
        if max(abs(p - q) for p, q in zip(x, y)) > 1e-3:
            witness = (c1, c2, x, y)
            break
    elapsed = time.perf_counter() - t0
    ok = (assoc <= 1e-9 and multiply_black and dstin_identity and commute <= 1e-12
          and witness is not None and elapsed < 5.0)
    w = "none" if witness is None else " ".join(
        f"c{k + 1}=({', '.join(f'{v:.3f}' for v in witness[k])})" for k in range(2))
    verdict(1, ok, f"assoc {assoc:.2e}, multiply black {multiply_black}, dstin identity "
                   f"{dstin_identity}, luma commutation {commute:.1e}, witness {w}, {elapsed:.2f}s")


# ---------------------------------------------------------------------------
# 2. Rasterizer against a naive per-pixel evaluator
# ---------------------------------------------------------------------------
# The oracle walks the command list once per pixel with a stack of saved
# layer colors and clip flags.  It never builds layer terms and shares no
# code with the library beyond the data classes.  Arithmetic follows the
# library's formulas in the same operation order, so agreement is bitwise.

def o_contains(s, x, y):
    if isinstance(s, Rect):
        return s.left <= x < s.right and s.top <= y < s.bottom
    if isinstance(s, Circle):
        dx, dy = x - s.center[0], y - s.center[1]
        return dx * dx + dy * dy <= s.radius * s.radius
    if isinstance(s, Intersect):
        return o_contains(s.lhs, x, y) and o_contains(s.rhs, x, y)
    if isinstance(s, Union):
        return o_contains(s.lhs, x, y) or o_contains(s.rhs, x, y)
    if isinstance(s, Full):
        return True
    assert isinstance(s, EmptyShape)
    return False


def o_ramp(stops, t):
    t = min(max(t, 0.0), 1.0)
    if len(stops) == 1:
        return tuple(stops[0][1])
    offsets = [o for o, _ in stops]
    k = min(max(bisect.bisect_right(offsets, t) - 1, 0), len(stops) - 2)
    (o0, c0), (o1, c1) = stops[k], stops[k + 1]
    span = o1 - o0
    u = 1.0 if span <= 0.0 else (t - o0) / span
    return tuple(c0[j] + (c1[j] - c0[j]) * u for j in range(4))


def o_fill(f, x, y):
    if isinstance(f, Solid):
        return tuple(f.color)
    if isinstance(f, LinearGradient):
        (x0, y0), (x1, y1) = f.p0, f.p1
        dx, dy = x1 - x0, y1 - y0
        return o_ramp(f.stops, ((x - x0) * dx + (y - y0) * dy) / (dx * dx + dy * dy))
    assert isinstance(f, RadialGradient)
    ex, ey = x - f.center[0], y - f.center[1]
    return o_ramp(f.stops, math.sqrt(ex * ex + ey * ey) / f.radius)


def o_filter(kind, c):
    if kind is FilterKind.ID:
        return c
    a, r, g, b = c
    return (min(0.2126 * r + 0.7152 * g + 0.0722 * b, a), 0.0, 0.0, 0.0)


def o_blend(mode, d, s):
    da, dr, dg, db = d
    sa, sr, sg, sb = s
    if mode is BlendMode.SRC_OVER:
        return (sa + da * (1.0 - sa), sr + dr * (1.0 - sa), sg + dg * (1.0 - sa), sb + db * (1.0 - sa))
    if mode is BlendMode.DST_IN:
        return (da * sa, dr * sa, dg * sa, db * sa)
    if mode is BlendMode.SRC_OUT:
        return (sa * (1.0 - da), sr * (1.0 - da), sg * (1.0 - da), sb * (1.0 - da))
    assert mode is BlendMode.MULTIPLY
    a = sa + da * (1.0 - sa)
    return (a,) + tuple(min(s_ * d_ + s_ * (1.0 - da) + d_ * (1.0 - sa), a)
                        for s_, d_ in ((sr, dr), (sg, dg), (sb, db)))


def o_pixel(records, x, y):
    color, inside, stack = (0.0, 0.0, 0.0, 0.0), True, []
    for rec in records:
        if isinstance(rec, Draw):
            src = o_fill(rec.paint.fill, x, y) if inside and o_contains(rec.shape, x, y) else (0.0,) * 4
            color = o_blend(rec.paint.blend, color, o_filter(rec.paint.filter, src))
        elif isinstance(rec, Clip):
            inside = inside and o_contains(rec.shape, x, y)
        elif isinstance(rec, Save):
            stack.append((None, inside, None))
        elif isinstance(rec, SaveLayer):
            stack.append((rec.paint, inside, color))
            color = (0.0,) * 4
        elif isinstance(rec, Restore):
            paint, inside, below = stack.pop()
            if paint is not None:
                color = o_blend(paint.blend, below, o_filter(paint.filter, color))
        else:
            assert isinstance(rec, NoOp)
    return color


def test_criterion_2_raster_matches_naive_evaluator():
    t0 = time.perf_counter()
    entries = generate_corpus(2, 200, {"random": 1.0}, size=64)
    bad = []
    for e in entries:
        img = rasterize(e.program, 64, 64)
        recs = e.program.records
        want = np.array([[o_pixel(recs, i + 0.5, j + 0.5) for i in range(64)] for j in range(64)])
        if not np.array_equal(img.pixels, want):
            bad.append(e.name)
    elapsed = time.perf_counter() - t0
    verdict(2, not bad and elapsed < 60.0,
            f"{200 - len(bad)}/200 programs bit-equal at 64x64, {elapsed:.1f}s"
            + (f", first mismatch {bad[0]}" if bad else ""))


# ---------------------------------------------------------------------------
# 7. Performance and the cost proxy
# ---------------------------------------------------------------------------
# Timed before the criterion 3 fixture exists so its rasters and traces do
# not inflate collector pauses.

def median_ms(n, reps=21):
    report = bench_programs([(f"buffer-{n}", generate_buffer(n, seed=0))], OptimizeConfig(),
                            reps=reps, warmup=3)
    return report["programs"][0]["optimize_time_ns"] / 1e6


@pytest.fixture(scope="module")
def timings():
    gc.collect()
    return {n: median_ms(n) for n in (10_000, 20_000)}


def test_criterion_7a_10k_buffer(timings):
    ms = timings[10_000]
    verdict("7a", ms <= 5.0, f"10k-record buffer median {ms:.2f} ms (limit 5 ms)")


def test_criterion_7b_linearity(timings):
    ratio = timings[20_000] / timings[10_000]
    verdict("7b", ratio <= 3.0, f"20k/10k median ratio {ratio:.2f} (limit 3)")


def test_criterion_7c_cost_proxy():
    cfg = OptimizeConfig()
    pattern = generate_corpus(7, 100, {f: 1.0 for f in PATTERN_FAMILIES})
    near = generate_corpus(7, 100, {f: 1.0 for f in NEAR_MISS_FAMILIES})
    rp = bench_programs([(e.name, e.program) for e in pattern], cfg, reps=10, warmup=0)
    rn = bench_programs([(e.name, e.program) for e in near], cfg, reps=10, warmup=0)
    g_pattern = rp["aggregate"]["geomean_speedup_proxy"]
    g_near = rn["aggregate"]["geomean_speedup_proxy"]
    all_one = all(r["speedup_proxy"] == 1.0 for r in rn["programs"])
    ok = g_pattern > 1.0 and g_near == 1.0 and all_one
    verdict("7c", ok, f"geomean speedup proxy {g_pattern:.3f} over patterns, {g_near!r} over near misses")


# ---------------------------------------------------------------------------
# 3. Rewrite soundness, and 5. translation validation of the same traces
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def soundness_run():
    t0 = time.perf_counter()
    mix = {f: 1.0 for f in PATTERN_FAMILIES}
    entries = generate_corpus(3, 400, mix, size=SIZE)
    cache, rows = {}, []
    for e in entries:
        out, trace = optimize(e.program)
        before = cache.setdefault((e.program, SIZE), rasterize(e.program, SIZE, SIZE))
        after = cache.setdefault((out, SIZE), rasterize(out, SIZE, SIZE))
        rows.append((e, trace, image_diff_ae(before, after, 0.01)))
    return rows, cache, time.perf_counter() - t0


def test_criterion_3_rewrite_soundness(soundness_run):
    rows, _, elapsed = soundness_run
    per_family = {f: sum(e.family == f for e, _, _ in rows) for f in PATTERN_FAMILIES}
    firings = sum(len(t) for _, t, _ in rows)
    differing = sum(r.differing_pixels for _, _, r in rows)
    worst = max(r.max_channel_delta for _, _, r in rows)
    nests = sum(e.variant.startswith("nest") for e, _, _ in rows)
    ok = (all(n == 100 for n in per_family.values()) and differing == 0 and worst <= 1e-6
          and elapsed < 600)
    verdict(3, ok, f"{len(rows)} programs ({nests} nests), {firings} rewrites, {differing} "
                   f"differing pixels, max delta {worst:.2e}, {elapsed:.1f}s")


def test_criterion_5_translation_validation(soundness_run):
    rows, cache, _ = soundness_run
    t0 = time.perf_counter()
    cfg = ValidateConfig(resolution=SIZE)
    not_validated = [e.name for e, t, _ in rows if validate_trace(t, cfg, cache).overall != VALIDATED]
    outcomes = {}
    for m in fault_suite(0):
        outcomes[(m.pass_name, m.mutation)] = validate_trace(m.trace, cfg).overall
    caught = sum(v in (REFUTED, SIDECHECK_FAILED) for v in outcomes.values())
    elapsed = time.perf_counter() - t0
    ok = not not_validated and len(outcomes) == 12 and caught == 12
    verdict(5, ok, f"{len(rows) - len(not_validated)}/{len(rows)} traces validated, "
                   f"{caught}/{len(outcomes)} mutants refuted or sidecheck_failed "
                   f"({sum(v == REFUTED for v in outcomes.values())} refuted), {elapsed:.1f}s")


# ---------------------------------------------------------------------------
# 4. Side-condition necessity
# ---------------------------------------------------------------------------

def test_criterion_4_side_condition_necessity():
    found = {}
    for name in PASS_ORDER:
        for e in generate_corpus(4, 80, {NEAR_FAMILY[name]: 1.0}, size=SIZE):
            firings, _ = transform(PASSES[name](), RecordBuffer.from_program(e.program))
            if firings:
                continue
            forced = force_apply(e.program, name)
            if forced is None:
                continue
            diff = image_diff_ae(rasterize(e.program, SIZE, SIZE), rasterize(forced[0], SIZE, SIZE))
            if diff.differing_pixels > 0:
                found[name] = (e.name, e.variant, diff.differing_pixels)
                break
    detail = ", ".join(f"{n}: {v[1]} ({v[2]} px)" for n, v in found.items())
    verdict(4, len(found) == 4, detail or "no witnesses")


# ---------------------------------------------------------------------------
# 6. Cascade
# ---------------------------------------------------------------------------

def test_criterion_6_cascade():
    p = pinterest_program()
    out, trace = optimize(p)
    fired = trace.fired_passes()
    layers = cost_metrics(out, SIZE, SIZE).savelayer_count
    v = validate_trace(trace, ValidateConfig(resolution=SIZE))
    ok = trace.iterations >= 2 and len(set(fired)) == 3 and len(fired) == 3 and v.validated \
        and layers == 0
    verdict(6, ok, f"{trace.iterations} iterations, fired {fired}, {v.overall}, "
                   f"{layers} SaveLayers left")


# ---------------------------------------------------------------------------
# 8. Format round trip and rejection
# ---------------------------------------------------------------------------

def test_criterion_8_format():
    entries = generate_corpus(8, 450)
    programs = [e.program for e in entries] + [generate_buffer(2000, seed=8)]
    mismatched = [i for i, p in enumerate(programs) if load_program(save_program(p)) != p]
    compact = [i for i, p in enumerate(programs) if load_program(save_program(p, indent=None)) != p]
    wrong = []
    for name, doc, cls in INVALID_DOCS:
        try:
            load_program(as_bytes(doc))
        except cls:
            continue
        except Exception as e:  # noqa: BLE001
            wrong.append(f"{name}: {type(e).__name__}")
        else:
            wrong.append(f"{name}: accepted")
    ok = not mismatched and not compact and len(INVALID_DOCS) == 20 and not wrong
    verdict(8, ok, f"{len(programs) - len(mismatched)}/{len(programs)} programs round-trip, "
                   f"{20 - len(wrong)}/{len(INVALID_DOCS)} invalid documents rejected with their class"
                   + (f"; {wrong}" if wrong else ""))
