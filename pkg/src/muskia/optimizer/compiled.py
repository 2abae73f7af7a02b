"""Compiled optimizer engine.

Each record is summarized by a 64-bit signature holding exactly the facts
the passes inspect (opcode, blend, filter, fill kind, opacity bits, and a
shape hash for draws).  A numba kernel runs the same per-layer state
machines as the reference passes over these integers, including tombstones,
queued insertions and the end-of-iteration merge, and reports every firing.
Python builds the few records the firings create and assembles the output
by id.  The trace replays the firings on real records through the shared
rewrite helpers, lazily, the first time it is read.
"""
from __future__ import annotations

import numpy as np

from ..color import (
    BlendMode,
    FilterKind,
    LinearGradient,
    RadialGradient,
    Solid,
    filter_eval,
    gradient_all_stops_opaque,
    is_opaque,
)
from ..commands import NOOP, RESTORE, SAVE, Clip, Draw, NoOp, Program, Restore, Save, SaveLayer, check_balanced
from .buffer import RecordBuffer
from .rewrites import (
    PASS_ORDER,
    apply_dstin,
    apply_gradient,
    apply_luma,
    apply_srcover,
    luma_replacement,
)
from .trace import RawApplication, RewriteTrace

try:
    from numba import njit
except ImportError:  # pragma: no cover - exercised only without numba
    njit = None

_jit = njit(cache=True, nogil=True) if njit is not None else (lambda f: f)


class CompiledUnavailable(RuntimeError):
    pass


class _ShapeHashCollision(RuntimeError):
    pass


OP_DRAW, OP_CLIP, OP_SAVE, OP_SAVE_LAYER, OP_RESTORE, OP_NOOP = range(6)
OP_MASK = 7
BLEND_SHIFT = 3
BLEND_MASK = 3 << BLEND_SHIFT
FILTER_LUMA = 1 << 5
FILL_SHIFT = 6
FILL_MASK = 3 << FILL_SHIFT
OPAQUE = 1 << 8
LUMA_OPAQUE = 1 << 9
HASH_SHIFT = 16
HASH_BITS = (1 << 47) - 1

BLEND_CODES = {BlendMode.SRC_OVER: 0, BlendMode.DST_IN: 1, BlendMode.MULTIPLY: 2,
               BlendMode.SRC_OUT: 3}
B_SRC_OVER, B_DST_IN = 0, 1
FILL_SOLID, FILL_LINEAR, FILL_RADIAL = 0, 1, 2

P_LUMA, P_GRADIENT, P_DSTIN, P_SRCOVER = range(4)

_SIMPLE = {Save: OP_SAVE, Restore: OP_RESTORE, NoOp: OP_NOOP}


def _paint_bits(paint) -> int:
    bits = BLEND_CODES[paint.blend] << BLEND_SHIFT
    if paint.filter is FilterKind.LUMA:
        bits |= FILTER_LUMA
    fill = paint.fill
    if isinstance(fill, LinearGradient):
        bits |= FILL_LINEAR << FILL_SHIFT
    elif isinstance(fill, RadialGradient):
        bits |= FILL_RADIAL << FILL_SHIFT
    if gradient_all_stops_opaque(fill):
        bits |= OPAQUE
    if isinstance(fill, Solid) and is_opaque(filter_eval(FilterKind.LUMA, fill.color)):
        bits |= LUMA_OPAQUE
    return bits


def record_signature(rec) -> int:
    kind = type(rec)
    if kind in _SIMPLE:
        return _SIMPLE[kind]
    if kind is Clip:
        return OP_CLIP
    if kind is SaveLayer:
        return OP_SAVE_LAYER | _paint_bits(rec.paint)
    if kind is Draw:
        return OP_DRAW | _paint_bits(rec.paint) | ((hash(rec.shape) & HASH_BITS) << HASH_SHIFT)
    raise TypeError(f"not a command: {rec!r}")


def signatures(program: Program) -> np.ndarray:
    """Per-record signatures, computed once per Program instance."""
    cached = program.__dict__.get("_signatures")
    if cached is None:
        cached = np.fromiter((record_signature(r) for r in program.records), dtype=np.int64,
                             count=len(program.records))
        cached.setflags(write=False)
        program.__dict__["_signatures"] = cached
    return cached


# ---------------------------------------------------------------------------
# Kernel
#
# Alongside the signature array the kernel keeps a parallel array of record
# ids: indices into a table holding the input records, then SAVE, RESTORE
# and NOOP, then each record a firing creates, numbered in firing order.
# ---------------------------------------------------------------------------

ROW_WIDTH = 8   # iter, pid, a0..a4, id of the record the firing created (or -1)


@_jit
def grow_rows(rows, nrows):
    if nrows < rows.shape[0]:
        return rows
    bigger = np.empty((rows.shape[0] * 2 + 16, rows.shape[1]), np.int64)
    bigger[:nrows] = rows[:nrows]
    return bigger


@_jit
def grow_ins(ins, nins, need):
    if nins + need <= ins.shape[0]:
        return ins
    bigger = np.empty((max(ins.shape[0] * 2, nins + need) + 16, 3), np.int64)
    bigger[:nins] = ins[:nins]
    return bigger


@_jit
def push_row(rows, nrows, it, pid, a0, a1, a2, a3, a4, new_id):
    rows = grow_rows(rows, nrows)
    rows[nrows, 0] = it
    rows[nrows, 1] = pid
    rows[nrows, 2] = a0
    rows[nrows, 3] = a1
    rows[nrows, 4] = a2
    rows[nrows, 5] = a3
    rows[nrows, 6] = a4
    rows[nrows, 7] = new_id
    return rows, nrows + 1


@_jit
def scan_srcover(cur, ids, n, cap, it, rows, nrows, base):
    matching = np.zeros(cap, np.bool_)
    fsave = np.zeros(cap, np.int64)
    fopen = np.zeros(cap, np.int64)
    depth = 0
    save_count = 0
    for i in range(n):
        s = cur[i]
        op = s & OP_MASK
        if op == OP_DRAW:
            if (s & BLEND_MASK) >> BLEND_SHIFT != B_SRC_OVER:
                matching[depth] = False
        elif op == OP_SAVE_LAYER:
            matching[depth] = False
            depth += 1
            fsave[depth] = save_count
            fopen[depth] = i
            matching[depth] = ((s & BLEND_MASK) >> BLEND_SHIFT == B_SRC_OVER
                               and (s & FILTER_LUMA) == 0 and (s & OPAQUE) != 0)
        elif op == OP_SAVE:
            save_count += 1
        elif op == OP_RESTORE:
            if depth > 0 and fsave[depth] == save_count:
                if matching[depth]:
                    rows, nrows = push_row(rows, nrows, it, P_SRCOVER, fopen[depth],
                                           0, 0, 0, 0, -1)
                    cur[fopen[depth]] = OP_SAVE
                    ids[fopen[depth]] = base[0]
                else:
                    matching[depth - 1] = False
                depth -= 1
            else:
                save_count -= 1
        elif op == OP_NOOP:
            matching[depth] = False
    return rows, nrows


@_jit
def scan_luma(cur, ids, n, cap, it, rows, nrows, base):
    # phases: -1 dead, 0 fresh, 1 inner open, 2 ready
    mask = np.zeros(cap, np.bool_)
    phase = np.full(cap, -1, np.int64)
    inner = np.zeros(cap, np.bool_)
    inner_ok = np.ones(cap, np.bool_)
    draw = np.full(cap, -1, np.int64)
    cand = np.zeros((cap, 3), np.int64)
    fsave = np.zeros(cap, np.int64)
    fopen = np.zeros(cap, np.int64)
    depth = 0
    save_count = 0
    for i in range(n):
        s = cur[i]
        op = s & OP_MASK
        blend = (s & BLEND_MASK) >> BLEND_SHIFT
        if op == OP_DRAW:
            if (inner[depth] and inner_ok[depth] and draw[depth] < 0
                    and (s & FILL_MASK) >> FILL_SHIFT == FILL_SOLID
                    and blend == B_SRC_OVER and (s & FILTER_LUMA) == 0):
                draw[depth] = i
                phase[depth] = -1
            else:
                phase[depth] = -1
                inner_ok[depth] = False
        elif op == OP_SAVE_LAYER:
            c = depth + 1
            mask[c] = blend == B_DST_IN
            phase[c] = 0 if mask[c] else -1
            inner[c] = False
            inner_ok[c] = True
            draw[c] = -1
            if (mask[depth] and phase[depth] == 0 and (s & FILTER_LUMA) != 0
                    and blend == B_SRC_OVER):
                inner[c] = True
                phase[depth] = 1
            else:
                phase[depth] = -1
            inner_ok[depth] = False
            depth = c
            fsave[depth] = save_count
            fopen[depth] = i
        elif op == OP_RESTORE and depth > 0 and fsave[depth] == save_count:
            c = depth
            p = depth - 1
            if mask[c] and phase[c] == 2:
                new_id = base[3]
                base[3] += 1
                rows, nrows = push_row(rows, nrows, it, P_LUMA, fopen[c],
                                       cand[c, 0], cand[c, 1], cand[c, 2], 0, new_id)
                d = cur[cand[c, 1]]
                nd = d & ~(FILTER_LUMA | FILL_MASK | OPAQUE | LUMA_OPAQUE)
                if d & LUMA_OPAQUE:
                    nd |= OPAQUE
                cur[cand[c, 0]] = OP_NOOP
                cur[cand[c, 1]] = nd
                cur[cand[c, 2]] = OP_NOOP
                ids[cand[c, 0]] = base[2]
                ids[cand[c, 1]] = new_id
                ids[cand[c, 2]] = base[2]
            if inner[c] and phase[p] == 1:
                if inner_ok[c] and draw[c] >= 0:
                    phase[p] = 2
                    cand[p, 0] = fopen[c]
                    cand[p, 1] = draw[c]
                    cand[p, 2] = i
                else:
                    phase[p] = -1
            depth = p
        else:
            if op == OP_SAVE:
                save_count += 1
            elif op == OP_RESTORE:
                save_count -= 1
            phase[depth] = -1
            inner_ok[depth] = False
    return rows, nrows


@_jit
def scan_gradient(cur, ids, n, cap, it, rows, nrows, base):
    drawn = np.zeros(cap, np.bool_)
    phase = np.zeros(cap, np.int64)
    anchor = np.full(cap, -1, np.int64)
    gmask = np.zeros(cap, np.bool_)
    mask_ok = np.ones(cap, np.bool_)
    mask_draw = np.full(cap, -1, np.int64)
    fsave = np.zeros(cap, np.int64)
    fopen = np.zeros(cap, np.int64)
    depth = 0
    save_count = 0
    for i in range(n):
        s = cur[i]
        op = s & OP_MASK
        blend = (s & BLEND_MASK) >> BLEND_SHIFT
        if op == OP_DRAW:
            if (gmask[depth] and mask_ok[depth] and mask_draw[depth] < 0
                    and (s & FILL_MASK) >> FILL_SHIFT != FILL_SOLID and (s & OPAQUE) != 0
                    and blend == B_SRC_OVER and (s & FILTER_LUMA) == 0):
                mask_draw[depth] = i
            else:
                mask_ok[depth] = False
            if not drawn[depth] and blend == B_SRC_OVER:
                phase[depth] = 1
                anchor[depth] = i
            else:
                phase[depth] = 0
            drawn[depth] = True
        elif op == OP_SAVE_LAYER:
            c = depth + 1
            drawn[c] = False
            phase[c] = 0
            anchor[c] = -1
            gmask[c] = False
            mask_ok[c] = True
            mask_draw[c] = -1
            if phase[depth] == 1 and blend == B_DST_IN and (s & FILTER_LUMA) == 0:
                gmask[c] = True
                phase[depth] = 2
            else:
                phase[depth] = 0
            drawn[depth] = True
            mask_ok[depth] = False
            depth = c
            fsave[depth] = save_count
            fopen[depth] = i
        elif op == OP_RESTORE and depth > 0 and fsave[depth] == save_count:
            c = depth
            p = depth - 1
            if gmask[c] and phase[p] == 2 and mask_ok[c] and mask_draw[c] >= 0:
                if (cur[mask_draw[c]] >> HASH_SHIFT) == (cur[anchor[p]] >> HASH_SHIFT):
                    rows, nrows = push_row(rows, nrows, it, P_GRADIENT, anchor[p],
                                           fopen[c], mask_draw[c], i, 0, -1)
                    cur[fopen[c]] = OP_NOOP
                    cur[mask_draw[c]] = OP_NOOP
                    cur[i] = OP_NOOP
                    ids[fopen[c]] = base[2]
                    ids[mask_draw[c]] = base[2]
                    ids[i] = base[2]
            phase[p] = 0
            depth = p
        else:
            if op == OP_SAVE:
                save_count += 1
            elif op == OP_RESTORE:
                save_count -= 1
            phase[depth] = 0
            mask_ok[depth] = False
    return rows, nrows


@_jit
def dstin_opaque(p1_luma, d):
    d_luma = (d & FILTER_LUMA) != 0
    if p1_luma and d_luma:
        return False
    if p1_luma or d_luma:
        return (d & LUMA_OPAQUE) != 0
    return (d & OPAQUE) != 0


@_jit
def fire_dstin(cur, ids, it, rows, nrows, ins, nins, base, layer, draw, restore, start, end):
    new_id = base[3]
    base[3] += 1
    rows, nrows = push_row(rows, nrows, it, P_DSTIN, layer, draw, restore, start, end, new_id)
    ins = grow_ins(ins, nins, draw - layer + 2)
    ins[nins, 0] = start
    ins[nins, 1] = OP_SAVE
    ins[nins, 2] = base[0]
    ins[nins + 1, 0] = start
    ins[nins + 1, 1] = OP_CLIP
    ins[nins + 1, 2] = new_id
    nins += 2
    for k in range(layer + 1, draw):
        ins[nins, 0] = start
        ins[nins, 1] = cur[k]
        ins[nins, 2] = ids[k]
        nins += 1
    ins[nins, 0] = end
    ins[nins, 1] = OP_RESTORE
    ins[nins, 2] = base[1]
    nins += 1
    for k in range(layer, restore + 1):
        cur[k] = OP_NOOP
        ids[k] = base[2]
    return rows, nrows, ins, nins


@_jit
def scan_dstin(cur, ids, n, cap, it, rows, nrows, base, ins, nins):
    l1_ok = np.ones(cap, np.bool_)
    sdepth = np.zeros(cap, np.int64)
    mask_set = np.zeros(cap, np.bool_)
    mask = np.zeros((cap, 3), np.int64)
    dmask = np.zeros(cap, np.bool_)
    p1_luma = np.zeros(cap, np.bool_)
    body_ok = np.ones(cap, np.bool_)
    draw = np.full(cap, -1, np.int64)
    fsave = np.zeros(cap, np.int64)
    fopen = np.zeros(cap, np.int64)
    depth = 0
    save_count = 0
    for i in range(n):
        s = cur[i]
        op = s & OP_MASK
        blend = (s & BLEND_MASK) >> BLEND_SHIFT
        if op == OP_NOOP:
            if not mask_set[depth]:
                l1_ok[depth] = False
            body_ok[depth] = False
            continue
        is_layer_restore = op == OP_RESTORE and depth > 0 and fsave[depth] == save_count
        if not is_layer_restore and mask_set[depth]:
            mask_set[depth] = False
            l1_ok[depth] = False
        if op == OP_DRAW:
            if blend != B_SRC_OVER:
                l1_ok[depth] = False
            if (dmask[depth] and body_ok[depth] and draw[depth] < 0
                    and (s & FILL_MASK) >> FILL_SHIFT == FILL_SOLID and blend == B_SRC_OVER):
                draw[depth] = i
            else:
                body_ok[depth] = False
        elif op == OP_CLIP:
            if sdepth[depth] == 0:
                l1_ok[depth] = False
            if draw[depth] >= 0:
                body_ok[depth] = False
        elif op == OP_SAVE:
            save_count += 1
            sdepth[depth] += 1
            body_ok[depth] = False
        elif op == OP_SAVE_LAYER:
            body_ok[depth] = False
            c = depth + 1
            l1_ok[c] = True
            sdepth[c] = 0
            mask_set[c] = False
            dmask[c] = False
            body_ok[c] = True
            draw[c] = -1
            if l1_ok[depth] and sdepth[depth] == 0 and blend == B_DST_IN:
                dmask[c] = True
                p1_luma[c] = (s & FILTER_LUMA) != 0
            else:
                l1_ok[depth] = False
            depth = c
            fsave[depth] = save_count
            fopen[depth] = i
        elif is_layer_restore:
            c = depth
            p = depth - 1
            if mask_set[c]:
                rows, nrows, ins, nins = fire_dstin(cur, ids, it, rows, nrows, ins, nins, base,
                                                    mask[c, 0], mask[c, 1], mask[c, 2],
                                                    fopen[c] + 1, i)
            if dmask[c]:
                if body_ok[c] and draw[c] >= 0 and dstin_opaque(p1_luma[c], cur[draw[c]]):
                    if mask_set[p]:
                        l1_ok[p] = False
                    mask_set[p] = True
                    mask[p, 0] = fopen[c]
                    mask[p, 1] = draw[c]
                    mask[p, 2] = i
                else:
                    l1_ok[p] = False
            depth = p
        else:
            save_count -= 1
            sdepth[depth] -= 1
            body_ok[depth] = False
    if mask_set[0]:
        rows, nrows, ins, nins = fire_dstin(cur, ids, it, rows, nrows, ins, nins, base,
                                            mask[0, 0], mask[0, 1], mask[0, 2], 0, n)
    return rows, nrows, ins, nins


@_jit
def merge(cur, ids, n, ins, nins):
    order = np.argsort(ins[:nins, 0], kind="mergesort")
    out = np.empty(n + nins, np.int64)
    out_ids = np.empty(n + nins, np.int64)
    m = 0
    k = 0
    for i in range(n + 1):
        while k < nins and ins[order[k], 0] == i:
            out[m] = ins[order[k], 1]
            out_ids[m] = ins[order[k], 2]
            m += 1
            k += 1
        if i < n and (cur[i] & OP_MASK) != OP_NOOP:
            out[m] = cur[i]
            out_ids[m] = ids[i]
            m += 1
    return out[:m].copy(), out_ids[:m].copy()


@_jit
def balance_error(sig):
    """Index of the first unbalanced record, ``len(sig)`` for a missing Restore, or -1."""
    depth = 0
    for i in range(sig.shape[0]):
        op = sig[i] & OP_MASK
        if op == OP_SAVE or op == OP_SAVE_LAYER:
            depth += 1
        elif op == OP_RESTORE:
            depth -= 1
            if depth < 0:
                return i
    return sig.shape[0] if depth != 0 else -1


@_jit
def kernel(sig, enabled, max_iterations):
    """Run the pipeline.  Returns firing rows, final ids, and the ids at each iteration start."""
    cur = sig.copy()
    n = cur.shape[0]
    ids = np.arange(n)
    base = np.array([n, n + 1, n + 2, n + 3], np.int64)   # SAVE, RESTORE, NOOP, next new id
    rows = np.empty((64, ROW_WIDTH), np.int64)
    nrows = 0
    snap = np.empty(0, np.int64)
    snap_off = np.zeros(max_iterations + 1, np.int64)
    for it in range(1, max_iterations + 1):
        snap = np.concatenate((snap, ids))
        snap_off[it] = snap.shape[0]
        cap = 2
        for i in range(n):
            if (cur[i] & OP_MASK) == OP_SAVE_LAYER:
                cap += 1
        start = nrows
        ins = np.empty((16, 3), np.int64)
        nins = 0
        if enabled[P_LUMA]:
            rows, nrows = scan_luma(cur, ids, n, cap, it, rows, nrows, base)
        if enabled[P_GRADIENT]:
            rows, nrows = scan_gradient(cur, ids, n, cap, it, rows, nrows, base)
        if enabled[P_DSTIN]:
            rows, nrows, ins, nins = scan_dstin(cur, ids, n, cap, it, rows, nrows, base,
                                                ins, nins)
        if enabled[P_SRCOVER]:
            rows, nrows = scan_srcover(cur, ids, n, cap, it, rows, nrows, base)
        cur, ids = merge(cur, ids, n, ins, nins)
        n = cur.shape[0]
        if nrows == start:
            break
    return rows[:nrows].copy(), ids, snap, snap_off


def get_kernel():
    if njit is None:
        raise CompiledUnavailable("numba is not installed")
    return kernel


# ---------------------------------------------------------------------------
# Python side
# ---------------------------------------------------------------------------

def _take(table: list, ids: np.ndarray) -> list:
    return list(map(table.__getitem__, ids.tolist()))


def run_kernel(program: Program, config) -> tuple:
    enabled = np.array([name in config.passes for name in PASS_ORDER], dtype=np.bool_)
    return get_kernel()(signatures(program), enabled, config.max_iterations)


def _check_balanced_fast(program: Program) -> None:
    if balance_error(signatures(program)) >= 0:
        check_balanced(program.records)   # raises with the usual message
        raise AssertionError("balance checks disagree")


def _new_records(program: Program, rows, snap, snap_off) -> list:
    """Build the id table: input records, SAVE/RESTORE/NOOP, then created records.

    Shapes never change under any rewrite and the luma pass runs first in
    each iteration, so every lookup can use the ids at iteration start.
    """
    table = list(program.records)
    table += [SAVE, RESTORE, NOOP]
    if len(rows) == 0:
        return table
    # table ids of the records each row names, looked up in its iteration's start ids
    base = snap_off[rows[:, 0] - 1]
    id0 = snap[base + rows[:, 2]].tolist()
    id1 = snap[base + rows[:, 3]].tolist()
    id2 = snap[base + rows[:, 4]].tolist()
    for k, (pid, new_id) in enumerate(rows[:, [1, 7]].tolist()):
        if pid == P_LUMA:
            table.append(luma_replacement(table[id2[k]]))
        elif pid == P_DSTIN:
            table.append(Clip(table[id1[k]].shape))
        elif pid == P_GRADIENT:
            if table[id0[k]].shape != table[id2[k]].shape:
                raise _ShapeHashCollision(f"row {k}")
            continue
        else:
            continue
        if new_id != len(table) - 1:
            raise AssertionError("kernel and replay disagree on record numbering")
    return table


def _replay_row(buf: RecordBuffer, row):
    pid, a0, a1, a2, a3, a4 = row[1:7]
    if pid == P_SRCOVER:
        return apply_srcover(buf, a0)
    if pid == P_LUMA:
        return apply_luma(buf, a0, a1, a2, a3)
    if pid == P_GRADIENT:
        return apply_gradient(buf, a0, a1, a2, a3)
    return apply_dstin(buf, a0, a1, a2, a3, a4)


def _raw_applications(table, rows, snap, snap_off, final_ids) -> list:
    """Replay the firings on real records with the shared rewrite helpers.

    Only run when the trace is read.  Each iteration's merged result is
    checked against the kernel's own buffer.
    """
    raw: list = []
    rows = rows.tolist()
    iterations = sorted({r[0] for r in rows})
    k = 0
    for it in iterations:
        buf = RecordBuffer(_take(table, snap[snap_off[it - 1]:snap_off[it]]))
        while k < len(rows) and rows[k][0] == it:
            pid = rows[k][1]
            before = (list(buf.records), list(buf.insertions))
            firings = []
            while k < len(rows) and rows[k][0] == it and rows[k][1] == pid:
                firings.append(_replay_row(buf, rows[k]))
                k += 1
            raw.append(RawApplication(PASS_ORDER[pid], it, *before,
                                      list(buf.records), list(buf.insertions), firings))
        buf.merge_insertions()
        buf.compact()
        nxt = snap_off[it + 1] if it + 1 < len(snap_off) and snap_off[it + 1] else None
        expect = _take(table, snap[snap_off[it]:nxt] if nxt is not None else final_ids)
        if buf.records != expect:
            raise AssertionError(f"replay of iteration {it} diverged from the kernel")
    return raw


def optimize_compiled(program: Program, config) -> tuple:
    _check_balanced_fast(program)
    rows, final_ids, snap, snap_off = run_kernel(program, config)
    try:
        table = _new_records(program, rows, snap, snap_off)
    except _ShapeHashCollision:
        from .pipeline import optimize_reference
        return optimize_reference(program, config)
    out = Program(_take(table, final_ids))
    trace = RewriteTrace(program, lambda: _raw_applications(table, rows, snap, snap_off, final_ids))
    return out, trace
