import json

import pytest
from hypothesis import given

from conftest import BLACK, RED, pinterest_program, programs, solid
from muskia.commands import RESTORE, SAVE, Draw, Program, SaveLayer, UnbalancedError, is_balanced, run
from muskia.layers import layer_equiv_sampled
from muskia.optimizer.pipeline import OptimizeConfig, optimize, parse_passes
from muskia.optimizer.rewrites import DSTIN, GRADIENT, LUMA, PASS_ORDER, SRCOVER
from muskia.optimizer.trace import TRACE_SCHEMA, TraceVersionSkew, load_trace, replay
from muskia.shapes import Rect
from muskia.skplite import SchemaError

REF = OptimizeConfig(engine="reference")


def test_program_without_layers_unchanged():
    p = Program([Draw(Rect(0, 0, 4, 4), solid(RED)), SAVE, RESTORE])
    out, trace = optimize(p, REF)
    assert out == p and len(trace) == 0 and trace.iterations == 0


def test_pass_order_is_fixed():
    assert PASS_ORDER == (LUMA, GRADIENT, DSTIN, SRCOVER)
    cfg = OptimizeConfig(passes=(SRCOVER, LUMA))
    assert cfg.ordered_passes == (LUMA, SRCOVER)


def test_config_validation():
    with pytest.raises(ValueError):
        OptimizeConfig(passes=("bogus",))
    with pytest.raises(ValueError):
        OptimizeConfig(max_iterations=0)
    with pytest.raises(ValueError):
        OptimizeConfig(engine="gpu")
    assert parse_passes(" subsume_luma , dstin_to_clip") == (LUMA, DSTIN)
    with pytest.raises(ValueError):
        parse_passes(" , ")


def test_unbalanced_input_rejected():
    with pytest.raises(UnbalancedError):
        optimize(Program([RESTORE]), REF)
    with pytest.raises(UnbalancedError):
        optimize(Program([SAVE] * 300), OptimizeConfig(engine="auto"))


def test_pinterest_cascade():
    p = pinterest_program()
    out, trace = optimize(p, REF)
    assert trace.fired_passes() == [LUMA, DSTIN, SRCOVER]
    assert trace.iterations >= 2
    assert not any(isinstance(r, SaveLayer) for r in out)
    assert layer_equiv_sampled(run(p), run(out), tol=1e-9)


def test_iteration_cap_limits_cascade():
    p = pinterest_program()
    _, full = optimize(p, REF)
    _, one = optimize(p, OptimizeConfig(max_iterations=1, engine="reference"))
    assert len(one) < len(full)
    assert one.fired_passes() == [LUMA]


def test_pass_subset():
    p = Program([SaveLayer(solid(BLACK)), Draw(Rect(0, 0, 4, 4), solid(RED)), RESTORE])
    _, trace = optimize(p, OptimizeConfig(passes=(SRCOVER,), engine="reference"))
    assert trace.fired_passes() == [SRCOVER]
    out, trace = optimize(p, OptimizeConfig(passes=(LUMA, DSTIN), engine="reference"))
    assert out == p and len(trace) == 0


def test_trace_snapshots_and_replay():
    p = pinterest_program()
    out, trace = optimize(p, REF)
    assert trace.snapshots[0] == p
    assert trace.snapshots[-1] == out
    assert trace.replay_ok()
    for e in trace.entries:
        assert e.after_snapshot_id == e.before_snapshot_id + 1
        got = replay(trace.snapshots[e.before_snapshot_id].records, [e])
        assert tuple(got) == trace.snapshots[e.after_snapshot_id].records


def test_trace_json_round_trip():
    _, trace = optimize(pinterest_program(), REF)
    doc = json.loads(trace.dumps())
    assert doc["schema"] == TRACE_SCHEMA
    back = load_trace(trace.dumps())
    assert back.snapshots == trace.snapshots
    assert back.entries == trace.entries
    assert back.applications == trace.applications
    assert back.replay_ok()


def test_trace_decode_errors():
    with pytest.raises(TraceVersionSkew):
        load_trace(json.dumps({"schema": "muskia-trace/99"}))
    with pytest.raises(SchemaError):
        load_trace("{")
    with pytest.raises(SchemaError):
        load_trace(json.dumps({"schema": TRACE_SCHEMA, "snapshots": []}))


@given(programs())
def test_output_balanced_and_sound(p):
    out, trace = optimize(p, REF)
    assert is_balanced(out.records)
    assert trace.replay_ok()
    assert layer_equiv_sampled(run(p), run(out), tol=1e-6)


@given(programs())
def test_optimize_reaches_fixpoint(p):
    out, trace = optimize(p, REF)
    if trace.iterations < REF.max_iterations:
        again, t2 = optimize(out, REF)
        assert again == out and len(t2) == 0
