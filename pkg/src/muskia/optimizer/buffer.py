"""Editable flat command buffer with tombstones and a pending insertion list."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from ..commands import NOOP, Command, NoOp, Program


@dataclass(frozen=True)
class Insertion:
    """Commands queued to go immediately before the record at ``index``."""

    index: int
    commands: tuple


class RecordBuffer:
    """A stable index table over immutable records.

    Replacement and tombstoning keep every index valid.  Insertions are only
    queued; :meth:`merge_insertions` applies them all in one linear scan.
    """

    def __init__(self, records: Iterable[Command] = ()):
        self.records: list = list(records)
        self.insertions: list = []

    @classmethod
    def from_program(cls, program: Program) -> "RecordBuffer":
        return cls(program.records)

    def __len__(self):
        return len(self.records)

    def __getitem__(self, i: int) -> Command:
        return self.records[i]

    def replace(self, index: int, cmd: Command) -> Command:
        old = self.records[index]
        self.records[index] = cmd
        return old

    def tombstone(self, index: int) -> Command:
        return self.replace(index, NOOP)

    def insert(self, index: int, commands: Sequence[Command]) -> None:
        if not 0 <= index <= len(self.records):
            raise IndexError(f"insertion index {index} out of range 0..{len(self.records)}")
        self.insertions.append(Insertion(index, tuple(commands)))

    def merge_insertions(self) -> None:
        self.records = merge_records(self.records, self.insertions)
        self.insertions = []

    def compact(self) -> None:
        """Drop tombstones.  Only valid with no insertions pending."""
        if self.insertions:
            raise RuntimeError("compact with pending insertions")
        self.records = [r for r in self.records if r is not NOOP and not isinstance(r, NoOp)]

    def to_program(self) -> Program:
        return Program(materialize(self.records, self.insertions))


def merge_records(records: Sequence[Command], insertions: Sequence[Insertion]) -> list:
    """Place each insertion before the record at its index, in one pass.

    Insertions at the same index keep their queue order.  An index equal to
    ``len(records)`` appends.
    """
    if not insertions:
        return list(records)
    n = len(records)
    for ins in insertions:
        if not 0 <= ins.index <= n:
            raise IndexError(f"insertion index {ins.index} out of range 0..{n}")
    ordered = sorted(insertions, key=lambda ins: ins.index)  # stable
    out = []
    k = 0
    for i in range(n + 1):
        while k < len(ordered) and ordered[k].index == i:
            out.extend(ordered[k].commands)
            k += 1
        if i < n:
            out.append(records[i])
    return out


def materialize(records: Sequence[Command], insertions: Sequence[Insertion] = ()) -> list:
    """The program a raw buffer stands for: insertions merged, tombstones gone."""
    return [r for r in merge_records(records, insertions) if not isinstance(r, NoOp)]
