"""The imperative command language: records, programs and step semantics."""
from __future__ import annotations

import typing
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Iterator, Sequence

from .layers import EMPTY, BlendLayer, DrawShape, LayerTerm, Paint
from .shapes import FULL, Shape, shape_intersect


@dataclass(frozen=True)
class Draw:
    shape: Shape
    paint: Paint


@dataclass(frozen=True)
class Clip:
    shape: Shape


@dataclass(frozen=True)
class Save:
    pass


@dataclass(frozen=True)
class SaveLayer:
    paint: Paint


@dataclass(frozen=True)
class Restore:
    pass


@dataclass(frozen=True)
class NoOp:
    pass


SAVE = Save()
RESTORE = Restore()
NOOP = NoOp()

Command = typing.Union[Draw, Clip, Save, SaveLayer, Restore, NoOp]


class UnbalancedError(ValueError):
    """Save/SaveLayer/Restore are not properly bracketed."""

    def __init__(self, kind: str, index: int):
        self.kind = kind
        self.index = index
        super().__init__(f"{kind} at record {index}")


def check_balanced(records: Sequence[Command]) -> None:
    """Raise :class:`UnbalancedError` unless brackets nest properly.

    The error carries the index of the first unmatched Restore, or else of
    the earliest opener left unclosed.
    """
    opens = []
    for i, rec in enumerate(records):
        if isinstance(rec, (Save, SaveLayer)):
            opens.append(i)
        elif isinstance(rec, Restore):
            if not opens:
                raise UnbalancedError("unmatched-restore", i)
            opens.pop()
    if opens:
        raise UnbalancedError("unclosed-opener", opens[0])


def is_balanced(records: Sequence[Command]) -> bool:
    try:
        check_balanced(records)
    except UnbalancedError:
        return False
    return True


@dataclass(frozen=True)
class Program:
    records: tuple

    def __init__(self, records: Iterable[Command] = ()):
        object.__setattr__(self, "records", tuple(records))

    def __len__(self):
        return len(self.records)

    def __iter__(self) -> Iterator[Command]:
        return iter(self.records)

    def __getitem__(self, i):
        return self.records[i]

    def without_noops(self) -> "Program":
        return Program(r for r in self.records if not isinstance(r, NoOp))

    @cached_property
    def brackets(self) -> dict:
        """Map from each opener index to its matching Restore index."""
        check_balanced(self.records)
        out, opens = {}, []
        for i, rec in enumerate(self.records):
            if isinstance(rec, (Save, SaveLayer)):
                opens.append(i)
            elif isinstance(rec, Restore):
                out[opens.pop()] = i
        return out


# ---------------------------------------------------------------------------
# Operational semantics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Sigma:
    """Machine state.  Heads are the tops of the stacks.

    ``pending`` parallels ``canvas`` and holds the SaveLayer paint for a clip
    entry pushed by SaveLayer, or None for one pushed by Save.
    """

    layers: tuple
    canvas: tuple
    pending: tuple = (None,)

    @property
    def top_layer(self) -> LayerTerm:
        return self.layers[0]

    @property
    def clip(self) -> Shape:
        return self.canvas[0]


def initial_state() -> Sigma:
    return Sigma((EMPTY,), (FULL,), (None,))


def step(cmd: Command, state: Sigma) -> Sigma:
    layers, canvas, pending = state.layers, state.canvas, state.pending
    if isinstance(cmd, Draw):
        top = DrawShape(layers[0], shape_intersect(cmd.shape, canvas[0]), cmd.paint)
        return Sigma((top,) + layers[1:], canvas, pending)
    if isinstance(cmd, Clip):
        return Sigma(layers, (shape_intersect(canvas[0], cmd.shape),) + canvas[1:], pending)
    if isinstance(cmd, Save):
        return Sigma(layers, (canvas[0],) + canvas, (None,) + pending)
    if isinstance(cmd, SaveLayer):
        return Sigma((EMPTY,) + layers, (canvas[0],) + canvas, (cmd.paint,) + pending)
    if isinstance(cmd, Restore):
        if len(canvas) < 2:
            raise UnbalancedError("unmatched-restore", -1)
        paint = pending[0]
        if paint is None:
            return Sigma(layers, canvas[1:], pending[1:])
        top, below = layers[0], layers[1]
        return Sigma((BlendLayer(below, top, paint),) + layers[2:], canvas[1:], pending[1:])
    if isinstance(cmd, NoOp):
        return state
    raise TypeError(f"not a command: {cmd!r}")


def execute(records: Sequence[Command]) -> Sigma:
    """Fold :func:`step` over the records; checks balance first."""
    check_balanced(records)
    state = initial_state()
    for rec in records:
        state = step(rec, state)
    return state


def run(program: Program | Sequence[Command]) -> LayerTerm:
    """Final layer of a balanced program."""
    records = program.records if isinstance(program, Program) else program
    return execute(records).top_layer


# ---------------------------------------------------------------------------
# Structured view
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Block:
    """A bracketed Save or SaveLayer group: opener, body, closing Restore."""

    opener: Command
    body: tuple
    start: int
    end: int


def structure(records: Sequence[Command]) -> tuple:
    """Nested view of a flat buffer: leaves are commands, groups are Blocks."""
    check_balanced(records)
    stack: list = [[]]
    starts = []
    for i, rec in enumerate(records):
        if isinstance(rec, (Save, SaveLayer)):
            stack.append([])
            starts.append((i, rec))
        elif isinstance(rec, Restore):
            body = stack.pop()
            start, opener = starts.pop()
            stack[-1].append(Block(opener, tuple(body), start, i))
        else:
            stack[-1].append(rec)
    return tuple(stack[0])


def flatten(tree: Iterable) -> list:
    out = []
    for node in tree:
        if isinstance(node, Block):
            out.append(node.opener)
            out.extend(flatten(node.body))
            out.append(RESTORE)
        else:
            out.append(node)
    return out
