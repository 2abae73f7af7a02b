"""The four rewrite passes as harness callbacks.

Each pass keeps a small mutable match state per open layer.  Patterns are
recognized on the fly and rewritten when the closing Restore of the
relevant layer is reached.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from ..color import BlendMode, FilterKind, Solid, filter_eval, gradient_all_stops_opaque, is_gradient, is_opaque
from ..commands import Draw, SaveLayer
from .harness import Frame, RewritePass
from .rewrites import (
    DSTIN,
    GRADIENT,
    LUMA,
    SRCOVER,
    apply_dstin,
    apply_gradient,
    apply_luma,
    apply_srcover,
)

SRC_OVER = BlendMode.SRC_OVER
DST_IN = BlendMode.DST_IN
ID = FilterKind.ID


# ---------------------------------------------------------------------------
# SaveLayer(SrcOver) -> Save
# ---------------------------------------------------------------------------

@dataclass
class SrcOverState:
    matching: bool   # False is the Ignore state


class SrcOverSaveLayer(RewritePass):
    name = SRCOVER

    def begin(self, buf):
        super().begin(buf)
        return SrcOverState(False)

    def on_save_layer(self, i, rec, parent):
        parent.matching = False
        p = rec.paint
        return SrcOverState(p.blend is SRC_OVER and p.filter is ID
                            and gradient_all_stops_opaque(p.fill))

    def on_draw(self, i, rec, state):
        if rec.paint.blend is not SRC_OVER:
            state.matching = False

    def on_other(self, i, rec, state):
        state.matching = False

    def on_inner_layer(self, parent):
        parent.matching = False

    def on_restore_layer(self, i, frame, parent):
        if frame.state.matching:
            self.fire(apply_srcover(self.buf, frame.open_index))
            return True
        return False


# ---------------------------------------------------------------------------
# SaveLayer(DstIn){ SaveLayer(Luma){ Draw(solid) } } -> SaveLayer(DstIn){ Draw(luma solid) }
# ---------------------------------------------------------------------------

DEAD, FRESH, INNER_OPEN, READY = -1, 0, 1, 2


@dataclass
class LumaState:
    mask: bool = False          # this layer is a DstIn layer
    phase: int = DEAD           # progress of the mask layer's body
    inner: bool = False         # this layer is the Luma layer directly inside a mask
    inner_ok: bool = True
    draw: int = -1
    candidate: Optional[tuple] = None


def _luma_draw_ok(rec: Draw) -> bool:
    p = rec.paint
    return isinstance(p.fill, Solid) and p.blend is SRC_OVER and p.filter is ID


class SubsumeLuma(RewritePass):
    name = LUMA

    def begin(self, buf):
        super().begin(buf)
        return LumaState()

    @staticmethod
    def _touch(state):
        # any record in a layer body breaks strict adjacency
        state.phase = DEAD
        state.inner_ok = False

    def on_save_layer(self, i, rec, parent):
        p = rec.paint
        child = LumaState(mask=p.blend is DST_IN, phase=FRESH if p.blend is DST_IN else DEAD)
        if (parent.mask and parent.phase == FRESH and p.filter is FilterKind.LUMA
                and p.blend is SRC_OVER):
            child.inner = True
            parent.phase = INNER_OPEN
        else:
            parent.phase = DEAD
        parent.inner_ok = False
        return child

    def on_draw(self, i, rec, state):
        if state.inner and state.inner_ok and state.draw < 0 and _luma_draw_ok(rec):
            state.draw = i
            state.phase = DEAD
        else:
            self._touch(state)

    def on_clip(self, i, rec, state):
        self._touch(state)

    def on_save(self, i, state):
        self._touch(state)

    def on_restore(self, i, state):
        self._touch(state)

    def on_other(self, i, rec, state):
        self._touch(state)

    def on_restore_layer(self, i, frame, parent):
        s = frame.state
        if s.mask and s.phase == READY:
            self.fire(apply_luma(self.buf, frame.open_index, *s.candidate))
        if s.inner and parent.phase == INNER_OPEN:
            if s.inner_ok and s.draw >= 0:
                parent.phase = READY
                parent.candidate = (frame.open_index, s.draw, i)
            else:
                parent.phase = DEAD
        return False


# ---------------------------------------------------------------------------
# Draw(s); SaveLayer(DstIn){ Draw(s, opaque gradient) } -> Draw(s)
# ---------------------------------------------------------------------------

@dataclass
class GradientState:
    drawn: bool = False
    phase: int = 0              # 0 idle, 1 anchor draw seen, 2 mask layer open
    anchor: int = -1
    gmask: bool = False         # this layer is a candidate mask
    mask_ok: bool = True
    mask_draw: int = -1


def _gradient_mask_draw_ok(rec: Draw) -> bool:
    p = rec.paint
    return (is_gradient(p.fill) and gradient_all_stops_opaque(p.fill)
            and p.blend is SRC_OVER and p.filter is ID)


class GradientMask(RewritePass):
    name = GRADIENT

    def begin(self, buf):
        super().begin(buf)
        return GradientState()

    @staticmethod
    def _touch(state):
        state.phase = 0
        state.mask_ok = False

    def on_draw(self, i, rec, state):
        if state.gmask and state.mask_ok and state.mask_draw < 0 and _gradient_mask_draw_ok(rec):
            state.mask_draw = i
        else:
            state.mask_ok = False
        if not state.drawn and rec.paint.blend is SRC_OVER:
            state.phase = 1
            state.anchor = i
        else:
            state.phase = 0
        state.drawn = True

    def on_clip(self, i, rec, state):
        self._touch(state)

    def on_save(self, i, state):
        self._touch(state)

    def on_restore(self, i, state):
        self._touch(state)

    def on_other(self, i, rec, state):
        self._touch(state)

    def on_save_layer(self, i, rec, parent):
        child = GradientState()
        p = rec.paint
        if parent.phase == 1 and p.blend is DST_IN and p.filter is ID:
            child.gmask = True
            parent.phase = 2
        else:
            parent.phase = 0
        parent.drawn = True
        parent.mask_ok = False
        return child

    def on_restore_layer(self, i, frame, parent):
        s = frame.state
        fired = False
        if s.gmask and parent.phase == 2 and s.mask_ok and s.mask_draw >= 0:
            if self.buf[s.mask_draw].shape == self.buf[parent.anchor].shape:
                self.fire(apply_gradient(self.buf, parent.anchor, frame.open_index, s.mask_draw, i))
                fired = True
        parent.phase = 0
        return fired


# ---------------------------------------------------------------------------
# l1; SaveLayer(DstIn){ Clip*; Draw(g, opaque) }  ->  Save; Clip(g); Clip*; l1; Restore
# ---------------------------------------------------------------------------

@dataclass
class DstInState:
    l1_ok: bool = True          # content so far is a valid l1
    depth: int = 0              # plain Save depth inside this layer
    mask: Optional[tuple] = None
    dmask: bool = False         # this layer is a candidate mask
    paint: object = None
    body_ok: bool = True
    draw: int = -1


def _dstin_opaque(layer_filter: FilterKind, rec: Draw) -> bool:
    c = rec.paint.fill.color
    return is_opaque(filter_eval(layer_filter, filter_eval(rec.paint.filter, c)))


class DstInToClip(RewritePass):
    name = DSTIN

    def begin(self, buf):
        super().begin(buf)
        return DstInState()

    @staticmethod
    def _after_mask(state):
        if state.mask is not None:
            state.mask = None
            state.l1_ok = False

    def on_draw(self, i, rec, state):
        self._after_mask(state)
        if rec.paint.blend is not SRC_OVER:
            state.l1_ok = False
        if (state.dmask and state.body_ok and state.draw < 0
                and isinstance(rec.paint.fill, Solid) and rec.paint.blend is SRC_OVER):
            state.draw = i
        else:
            state.body_ok = False

    def on_clip(self, i, rec, state):
        self._after_mask(state)
        if state.depth == 0:
            state.l1_ok = False
        if state.draw >= 0:
            state.body_ok = False

    def on_save(self, i, state):
        self._after_mask(state)
        state.depth += 1
        state.body_ok = False

    def on_restore(self, i, state):
        self._after_mask(state)
        state.depth -= 1
        state.body_ok = False

    def on_other(self, i, rec, state):
        # tombstones may trail the mask but not sit inside l1
        if state.mask is None:
            state.l1_ok = False
        state.body_ok = False

    def on_save_layer(self, i, rec, parent):
        self._after_mask(parent)
        parent.body_ok = False
        child = DstInState()
        if parent.l1_ok and parent.depth == 0 and rec.paint.blend is DST_IN:
            child.dmask = True
            child.paint = rec.paint
        else:
            parent.l1_ok = False
        return child

    def _fire(self, scope_start, scope_end, mask):
        layer, draw, restore = mask
        self.fire(apply_dstin(self.buf, layer, draw, restore, scope_start, scope_end))

    def on_restore_layer(self, i, frame, parent):
        s = frame.state
        if s.mask is not None:
            self._fire(frame.open_index + 1, i, s.mask)
        if s.dmask:
            if s.body_ok and s.draw >= 0 and _dstin_opaque(s.paint.filter, self.buf[s.draw]):
                parent.mask = (frame.open_index, s.draw, i)
            else:
                parent.l1_ok = False
        return False

    def on_end(self, n, root):
        if root.mask is not None:
            self._fire(0, n, root.mask)


PASSES = {
    LUMA: SubsumeLuma,
    GRADIENT: GradientMask,
    DSTIN: DstInToClip,
    SRCOVER: SrcOverSaveLayer,
}
