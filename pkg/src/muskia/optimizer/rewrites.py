"""Buffer edits performed by each rewrite once its pattern has matched.

Both optimizer engines call these, so a firing means the same edits no
matter which engine found it.
"""
from __future__ import annotations

from ..color import FilterKind, Solid, filter_eval
from ..commands import RESTORE, SAVE, Clip, Draw
from ..layers import Paint
from .buffer import RecordBuffer
from .harness import Firing

SRCOVER = "srcover_savelayer"
DSTIN = "dstin_to_clip"
LUMA = "subsume_luma"
GRADIENT = "gradient_mask"

PASS_ORDER = (LUMA, GRADIENT, DSTIN, SRCOVER)


def _tombstone_all(buf: RecordBuffer, indices) -> list:
    edits = []
    for i in indices:
        old = buf.tombstone(i)
        edits.append((i, old, buf[i]))
    return edits


def apply_srcover(buf: RecordBuffer, layer: int) -> Firing:
    old = buf.replace(layer, SAVE)
    return Firing(SRCOVER, layer, ((layer, old, SAVE),), ())


def luma_replacement(d: Draw) -> Draw:
    """The inner draw with the luma filter folded into its solid color."""
    luma = filter_eval(FilterKind.LUMA, d.paint.fill.color)
    return Draw(d.shape, Paint(Solid(luma), FilterKind.ID, d.paint.blend))


def apply_luma(buf: RecordBuffer, outer: int, inner: int, draw: int, inner_restore: int) -> Firing:
    d = buf[draw]
    new = luma_replacement(d)
    edits = _tombstone_all(buf, (inner,))
    buf.replace(draw, new)
    edits.append((draw, d, new))
    edits += _tombstone_all(buf, (inner_restore,))
    return Firing(LUMA, outer, tuple(edits), ())


def apply_gradient(buf: RecordBuffer, anchor: int, layer: int, mask_draw: int, restore: int) -> Firing:
    edits = _tombstone_all(buf, (layer, mask_draw, restore))
    return Firing(GRADIENT, anchor, tuple(edits), ())


def apply_dstin(buf: RecordBuffer, layer: int, draw: int, restore: int,
                scope_start: int, scope_end: int) -> Firing:
    """Hoist the mask's draw shape and clips to the front of the scope as clips.

    The mask body is ``Clip* ; Draw`` occupying ``layer+1 .. draw``.
    """
    clips = [buf[k] for k in range(layer + 1, draw)]
    shape = buf[draw].shape
    edits = _tombstone_all(buf, range(layer, restore + 1))
    head = [SAVE, Clip(shape), *clips]
    buf.insert(scope_start, head)
    buf.insert(scope_end, [RESTORE])
    inserted = tuple((scope_start, c) for c in head) + ((scope_end, RESTORE),)
    return Firing(DSTIN, layer, tuple(edits), inserted)
