"""Single-scan pass harness with a per-SaveLayer frame stack.

A pass is a set of callbacks.  The harness walks the buffer once, keeps a
stack of frames (one per open SaveLayer, each carrying the pass's match
state for that layer) and decides at every Restore whether it closes a
plain Save or a SaveLayer by comparing save counts.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional

from ..commands import Clip, Command, Draw, Restore, Save, SaveLayer, check_balanced
from .buffer import RecordBuffer

INLINE_FRAMES = 8


@dataclass
class Frame:
    state: Any
    save_count: int
    open_index: int


class FrameStack:
    """Stack of frames; the first eight live in a fixed array, the rest spill."""

    def __init__(self):
        self._inline: list = [None] * INLINE_FRAMES
        self._spill: list = []
        self._depth = 0
        self.max_depth = 0

    def __len__(self):
        return self._depth

    def push(self, frame: Frame) -> None:
        if self._depth < INLINE_FRAMES:
            self._inline[self._depth] = frame
        else:
            self._spill.append(frame)
        self._depth += 1
        self.max_depth = max(self.max_depth, self._depth)

    def pop(self) -> Frame:
        if self._depth == 0:
            raise IndexError("pop from empty frame stack")
        self._depth -= 1
        if self._depth >= INLINE_FRAMES:
            return self._spill.pop()
        frame, self._inline[self._depth] = self._inline[self._depth], None
        return frame

    def top(self) -> Optional[Frame]:
        if self._depth == 0:
            return None
        if self._depth > INLINE_FRAMES:
            return self._spill[-1]
        return self._inline[self._depth - 1]

    @property
    def spilled(self) -> bool:
        return self.max_depth > INLINE_FRAMES


@dataclass(frozen=True)
class Firing:
    """One rewrite: edits and insertions in raw buffer coordinates."""

    pass_name: str
    anchor: int
    edits: tuple       # ((index, old, new), ...)
    inserted: tuple    # ((index, command), ...)


class RewritePass:
    """Base class; subclasses override the callbacks they care about.

    ``state`` arguments are the match state of the innermost open layer (the
    root layer's state when no SaveLayer is open).
    """

    name = "pass"

    def begin(self, buf: RecordBuffer) -> Any:
        """Reset per-scan data and return the root layer's match state."""
        self.buf = buf
        self.firings: list = []
        return None

    def fire(self, firing: Firing) -> None:
        self.firings.append(firing)

    def on_save_layer(self, i: int, rec: SaveLayer, parent: Any) -> Any:
        return None

    def on_restore_layer(self, i: int, frame: Frame, parent: Any) -> bool:
        """Closing Restore of ``frame``; return True if the layer was rewritten away."""
        return False

    def on_inner_layer(self, parent: Any) -> None:
        """An inner SaveLayer of ``parent`` closed and survived."""

    def on_save(self, i: int, state: Any) -> None:
        pass

    def on_restore(self, i: int, state: Any) -> None:
        pass

    def on_draw(self, i: int, rec: Draw, state: Any) -> None:
        pass

    def on_clip(self, i: int, rec: Clip, state: Any) -> None:
        pass

    def on_other(self, i: int, rec: Command, state: Any) -> None:
        pass

    def on_end(self, n: int, root: Any) -> None:
        pass


@dataclass
class ScanStats:
    callbacks: int = 0
    max_depth: int = 0
    spilled: bool = False
    counts: dict = field(default_factory=dict)


def transform(p: RewritePass, buf: RecordBuffer, check: bool = True) -> tuple:
    """Run one pass over ``buf`` in a single scan; returns ``(firings, stats)``."""
    if check:
        check_balanced(buf.records)
    stats = ScanStats()
    counts = {"save_layer": 0, "restore_layer": 0, "save": 0, "restore": 0,
              "draw": 0, "clip": 0, "other": 0}
    root = p.begin(buf)
    frames = FrameStack()
    save_count = 0
    records = buf.records
    for i in range(len(records)):
        rec = records[i]
        top = frames.top()
        state = root if top is None else top.state
        if isinstance(rec, Draw):
            counts["draw"] += 1
            p.on_draw(i, rec, state)
        elif isinstance(rec, Clip):
            counts["clip"] += 1
            p.on_clip(i, rec, state)
        elif isinstance(rec, SaveLayer):
            counts["save_layer"] += 1
            frames.push(Frame(p.on_save_layer(i, rec, state), save_count, i))
        elif isinstance(rec, Save):
            counts["save"] += 1
            save_count += 1
            p.on_save(i, state)
        elif isinstance(rec, Restore):
            if top is not None and top.save_count == save_count:
                counts["restore_layer"] += 1
                frames.pop()
                below = frames.top()
                parent = root if below is None else below.state
                if not p.on_restore_layer(i, top, parent):
                    p.on_inner_layer(parent)
            else:
                counts["restore"] += 1
                save_count -= 1
                p.on_restore(i, state)
        else:
            counts["other"] += 1
            p.on_other(i, rec, state)
    p.on_end(len(records), root)
    stats.callbacks = sum(counts.values())
    stats.counts = counts
    stats.max_depth = frames.max_depth
    stats.spilled = frames.spilled
    return p.firings, stats
