"""Fault injection: rewrites applied where, or how, they should not be.

Sites are found by structure alone, ignoring every side condition, so a
rewrite can be forced onto a near-miss program.  Each mutant comes with a
one-step trace in the optimizer's format, ready for the validator.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Optional

from .color import BlendMode, FilterKind
from .commands import NOOP, RESTORE, SAVE, Clip, Draw, Program, Restore, Save, SaveLayer, is_balanced
from .corpus import CorpusEntry, make_entry
from .layers import Paint
from .optimizer.buffer import RecordBuffer
from .optimizer.harness import Firing, transform
from .optimizer.passes import PASSES
from .optimizer.rewrites import (
    DSTIN,
    GRADIENT,
    LUMA,
    PASS_ORDER,
    SRCOVER,
    apply_dstin,
    apply_gradient,
    apply_luma,
    apply_srcover,
)
from .optimizer.trace import RawApplication, RewriteTrace

MUTATIONS = ("drop_side_condition", "wrong_index", "wrong_replacement")

NEAR_FAMILY = {SRCOVER: "srcover_near", DSTIN: "dstin_near", LUMA: "luma_near",
               GRADIENT: "gradient_near"}
PATTERN_FAMILY = {SRCOVER: "srcover", DSTIN: "dstin", LUMA: "luma", GRADIENT: "gradient"}

_HELPERS = {SRCOVER: apply_srcover, LUMA: apply_luma, GRADIENT: apply_gradient, DSTIN: apply_dstin}


def _matches(records) -> dict:
    out, opens = {}, []
    for i, rec in enumerate(records):
        if isinstance(rec, (Save, SaveLayer)):
            opens.append(i)
        elif isinstance(rec, Restore):
            out[opens.pop()] = i
    return out


def _enclosing_layer(records, match: dict, i: int) -> int:
    best = -1
    for o, r in match.items():
        if o < i < r and isinstance(records[o], SaveLayer) and o > best:
            best = o
    return best


def find_sites(program: Program, pass_name: str) -> list:
    """Argument tuples for the pass's rewrite helper, matched on shape only."""
    recs = program.records
    match = _matches(recs)
    n = len(recs)
    sites = []
    for i, rec in enumerate(recs):
        if pass_name == SRCOVER and isinstance(rec, SaveLayer):
            sites.append((i,))
        elif pass_name == LUMA and isinstance(rec, SaveLayer) and rec.paint.blend is BlendMode.DST_IN:
            if i + 1 < n and isinstance(recs[i + 1], SaveLayer):
                inner_end = match[i + 1]
                draws = [k for k in range(i + 2, inner_end) if isinstance(recs[k], Draw)]
                if draws:
                    sites.append((i, i + 1, draws[0], inner_end))
        elif pass_name == GRADIENT and isinstance(rec, Draw):
            if (i + 3 < n and isinstance(recs[i + 1], SaveLayer)
                    and recs[i + 1].paint.blend is BlendMode.DST_IN
                    and isinstance(recs[i + 2], Draw) and match[i + 1] == i + 3):
                sites.append((i, i + 1, i + 2, i + 3))
        elif pass_name == DSTIN and isinstance(rec, SaveLayer) and rec.paint.blend is BlendMode.DST_IN:
            k = i + 1
            while k < n and isinstance(recs[k], Clip):
                k += 1
            if k < n and isinstance(recs[k], Draw):
                outer = _enclosing_layer(recs, match, i)
                start, end = (outer + 1, match[outer]) if outer >= 0 else (0, n)
                sites.append((i, k, match[i], start, end))
    return sites


@dataclass
class Mutant:
    pass_name: str
    mutation: str
    source: str          # corpus entry the program came from
    before: Program
    after: Program
    trace: RewriteTrace


def _one_step_trace(program: Program, pass_name: str,
                    edit: Callable[[RecordBuffer], Firing]) -> Optional[tuple]:
    buf = RecordBuffer.from_program(program)
    before = (list(buf.records), [])
    try:
        firing = edit(buf)
    except (AttributeError, IndexError, KeyError, TypeError):
        return None
    after = buf.to_program()
    if not is_balanced(after.records) or after == program:
        return None
    raw = RawApplication(pass_name, 1, *before, list(buf.records), list(buf.insertions), [firing])
    return after, RewriteTrace(program, [raw])


def force_apply(program: Program, pass_name: str, site: Optional[tuple] = None) -> Optional[tuple]:
    """Apply the rewrite at ``site`` (default: the first site where it applies) regardless of
    its side conditions.  Returns ``(after, trace)`` or None when nothing applies."""
    sites = [site] if site is not None else find_sites(program, pass_name)
    helper = _HELPERS[pass_name]
    for s in sites:
        out = _one_step_trace(program, pass_name, lambda buf, s=s: helper(buf, *s))
        if out is not None:
            return out
    return None


def _fired_anchors(program: Program, pass_name: str) -> set:
    fired, _ = transform(PASSES[pass_name](), RecordBuffer.from_program(program))
    return {f.anchor for f in fired}


def legal_sites(program: Program, pass_name: str) -> list:
    """Sites where the shipped pass itself fires."""
    anchors = _fired_anchors(program, pass_name)
    return [s for s in find_sites(program, pass_name) if s[0] in anchors]


# -- wrong index: the right rewrite aimed at a neighbouring record ----------

def _wrong_index_edit(program: Program, pass_name: str, site: tuple):
    recs = program.records
    if pass_name == SRCOVER:
        legal = _fired_anchors(program, SRCOVER)
        others = [i for i, r in enumerate(recs) if isinstance(r, SaveLayer) and i not in legal]
        if not others:
            return None
        return lambda buf: apply_srcover(buf, others[0])
    if pass_name == LUMA:
        outer, inner, draw, inner_end = site
        outer_end = _matches(recs)[outer]
        # drop the outer mask layer instead of the inner luminance layer
        return lambda buf: apply_luma(buf, outer, outer, draw, outer_end)
    if pass_name == GRADIENT:
        anchor, layer, mask, restore = site
        # delete the anchor instead of the mask draw
        return lambda buf: apply_gradient(buf, anchor, layer, anchor, restore)
    layer, draw, restore, start, end = site
    # hoist to the mask position instead of the scope start
    return lambda buf: apply_dstin(buf, layer, draw, restore, layer, end)


# -- wrong replacement: the right records, rewritten into the wrong thing ---

def _wrong_replacement_edit(program: Program, pass_name: str, site: tuple):
    recs = program.records
    if pass_name == SRCOVER:
        (layer,) = site
        p = recs[layer].paint
        bad = SaveLayer(Paint(p.fill, FilterKind.ID, BlendMode.SRC_OUT))

        def edit(buf):
            old = buf.replace(layer, bad)
            return Firing(SRCOVER, layer, ((layer, old, bad),), ())
        return edit
    if pass_name == LUMA:
        outer, inner, draw, inner_end = site

        def edit(buf):
            f = apply_luma(buf, outer, inner, draw, inner_end)
            old = recs[draw]     # keep the unfiltered color
            buf.replace(draw, old)
            edits = tuple((i, o, old if i == draw else n) for i, o, n in f.edits)
            return Firing(LUMA, outer, edits, ())
        return edit
    if pass_name == GRADIENT:
        anchor, layer, mask, restore = site

        def edit(buf):
            f = apply_gradient(buf, anchor, layer, mask, restore)
            a = recs[anchor]
            painted = Draw(a.shape, recs[mask].paint)   # the gradient replaces the anchor's paint
            buf.replace(anchor, painted)
            return Firing(GRADIENT, anchor, ((anchor, a, painted),) + f.edits, ())
        return edit
    layer, draw, restore, start, end = site

    def edit(buf):
        # hoist the mask's clips but forget the clip to the mask draw itself
        clips = [buf[k] for k in range(layer + 1, draw)]
        edits = tuple((k, buf.tombstone(k), NOOP) for k in range(layer, restore + 1))
        head = [SAVE, *clips]
        buf.insert(start, head)
        buf.insert(end, [RESTORE])
        return Firing(DSTIN, layer, edits, tuple((start, c) for c in head) + ((end, RESTORE),))
    return edit


def _entries(family: str, seed: int, limit: int) -> Iterable[CorpusEntry]:
    for index in range(limit):
        yield make_entry(seed, family, index)


def make_mutant(pass_name: str, mutation: str, seed: int = 0, limit: int = 200) -> Mutant:
    """First corpus program (in seeded order) where the mutation applies."""
    if mutation not in MUTATIONS:
        raise ValueError(f"unknown mutation {mutation!r}")
    family = NEAR_FAMILY[pass_name] if mutation == "drop_side_condition" else PATTERN_FAMILY[pass_name]
    for entry in _entries(family, seed, limit):
        p = entry.program
        if mutation == "drop_side_condition":
            out = force_apply(p, pass_name)
        else:
            out = None
            for site in legal_sites(p, pass_name):
                make = _wrong_index_edit if mutation == "wrong_index" else _wrong_replacement_edit
                edit = make(p, pass_name, site)
                if edit is not None:
                    out = _one_step_trace(p, pass_name, edit)
                if out is not None:
                    break
        if out is not None:
            return Mutant(pass_name, mutation, entry.name, p, out[0], out[1])
    raise LookupError(f"no {family} program within {limit} admits {mutation} for {pass_name}")


def fault_suite(seed: int = 0) -> list:
    """One mutant per (pass, mutation) pair: twelve in all."""
    return [make_mutant(p, m, seed) for p in PASS_ORDER for m in MUTATIONS]
