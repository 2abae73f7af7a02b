"""Rewrite traces: per-application program snapshots plus the edits between them.

The optimizer logs raw buffer copies while it runs; snapshots and
snapshot-coordinate edits are only materialized when the trace is read.
Coordinates in a trace entry are positions in its before-snapshot, where
tombstones have been dropped and earlier pending insertions merged.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

from ..commands import NOOP, NoOp, Program
from ..skplite import (
    FormatError,
    SchemaError,
    command_to_json,
    decode_command,
    program_from_json,
    program_to_json,
)
from .buffer import Insertion, materialize

TRACE_SCHEMA = "muskia-trace/1"


@dataclass(frozen=True)
class TraceEntry:
    pass_name: str
    fired_at: int
    edits: tuple       # ((position, old, new), ...); new is NoOp for a deletion
    inserted: tuple    # ((position, command), ...), inserted before ``position``
    before_snapshot_id: int
    after_snapshot_id: int


@dataclass(frozen=True)
class Application:
    """One pass application that changed the program."""

    pass_name: str
    iteration: int
    before_snapshot_id: int
    after_snapshot_id: int
    entries: tuple     # indices into RewriteTrace.entries


@dataclass
class RawApplication:
    pass_name: str
    iteration: int
    before_records: list
    before_insertions: list
    after_records: list
    after_insertions: list
    firings: list


def replay(before: Sequence, entries: Sequence[TraceEntry]) -> list:
    """Apply entries (all against the same snapshot) and return the new program records."""
    out = list(before)
    inserts: dict = {}
    for e in entries:
        for pos, _old, new in e.edits:
            out[pos] = new
        for pos, cmd in e.inserted:
            inserts.setdefault(pos, []).append(cmd)
    merged = []
    for pos in range(len(out) + 1):
        merged.extend(inserts.get(pos, ()))
        if pos < len(out):
            merged.append(out[pos])
    return [r for r in merged if not isinstance(r, NoOp)]


def _coordinates(records: Sequence, insertions: Sequence[Insertion]) -> tuple:
    """Map raw record indices and insertion slots to snapshot positions.

    ``pos[i]`` is the position of raw record ``i`` (meaningless for
    tombstones); ``slot[i]`` is where a new insertion at raw index ``i``
    lands: after insertions already pending there, before record ``i``.
    """
    pending = [0] * (len(records) + 1)
    for ins in insertions:
        pending[ins.index] += len(ins.commands)
    pos = [0] * len(records)
    slot = [0] * (len(records) + 1)
    k = 0
    for i, rec in enumerate(records):
        k += pending[i]
        slot[i] = k
        pos[i] = k
        if not isinstance(rec, NoOp):
            k += 1
    slot[len(records)] = k + pending[len(records)]
    return pos, slot


class RewriteTrace:
    def __init__(self, initial: Program, raw=None):
        """``raw`` is a list of RawApplication, or a zero-argument callable producing one."""
        self._initial = initial
        self._raw_source = raw if raw is not None else []

    @cached_property
    def _raw(self) -> list:
        src = self._raw_source
        return src() if callable(src) else src

    @classmethod
    def from_parts(cls, snapshots: list, entries: list, applications: list) -> "RewriteTrace":
        t = cls(snapshots[0] if snapshots else Program())
        t.__dict__["_parts"] = (list(snapshots), list(entries), list(applications))
        return t

    @cached_property
    def _parts(self):
        snapshots = [self._initial.without_noops()]
        entries: list = []
        apps: list = []
        for raw in self._raw:
            before_id = len(snapshots) - 1
            pos, slot = _coordinates(raw.before_records, raw.before_insertions)
            after = Program(materialize(raw.after_records, raw.after_insertions))
            snapshots.append(after)
            after_id = len(snapshots) - 1
            ids = []
            for f in raw.firings:
                edits = tuple((pos[i], old, new) for i, old, new in f.edits)
                inserted = tuple((slot[i], cmd) for i, cmd in f.inserted)
                ids.append(len(entries))
                entries.append(TraceEntry(f.pass_name, pos[f.anchor], edits, inserted,
                                          before_id, after_id))
            apps.append(Application(raw.pass_name, raw.iteration, before_id, after_id, tuple(ids)))
        return snapshots, entries, apps

    @property
    def snapshots(self) -> list:
        return self._parts[0]

    @property
    def entries(self) -> list:
        return self._parts[1]

    @property
    def applications(self) -> list:
        return self._parts[2]

    def __len__(self):
        return len(self.entries) if "_parts" in self.__dict__ else sum(
            len(r.firings) for r in self._raw)

    def fired_passes(self) -> list:
        return [e.pass_name for e in self.entries]

    def firing_counts(self) -> dict:
        counts: dict = {}
        for e in self.entries:
            counts[e.pass_name] = counts.get(e.pass_name, 0) + 1
        return counts

    @property
    def iterations(self) -> int:
        """Number of pipeline iterations that changed the program."""
        return len({a.iteration for a in self.applications})

    def replay_ok(self) -> bool:
        for a in self.applications:
            before = self.snapshots[a.before_snapshot_id].records
            got = replay(before, [self.entries[k] for k in a.entries])
            if tuple(got) != self.snapshots[a.after_snapshot_id].records:
                return False
        return True

    # -- serialization ------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "schema": TRACE_SCHEMA,
            "snapshots": [program_to_json(s) for s in self.snapshots],
            "entries": [
                {
                    "pass_name": e.pass_name,
                    "fired_at": e.fired_at,
                    "edits": [{"index": i, "old": command_to_json(o), "new": command_to_json(n)}
                              for i, o, n in e.edits],
                    "inserted": [{"index": i, "command": command_to_json(c)} for i, c in e.inserted],
                    "before_snapshot_id": e.before_snapshot_id,
                    "after_snapshot_id": e.after_snapshot_id,
                }
                for e in self.entries
            ],
            "applications": [
                {"pass_name": a.pass_name, "iteration": a.iteration,
                 "before_snapshot_id": a.before_snapshot_id,
                 "after_snapshot_id": a.after_snapshot_id, "entries": list(a.entries)}
                for a in self.applications
            ],
        }

    def dumps(self, indent: int | None = None) -> str:
        return json.dumps(self.to_json(), indent=indent)


def trace_from_json(doc) -> RewriteTrace:
    """Decode a trace document; raises FormatError subclasses on bad input."""
    if not isinstance(doc, dict):
        raise SchemaError("$", "expected an object")
    if doc.get("schema") != TRACE_SCHEMA:
        raise TraceVersionSkew(doc.get("schema"))
    try:
        snapshots = [program_from_json(s) for s in doc["snapshots"]]
        entries = []
        for k, e in enumerate(doc["entries"]):
            entries.append(TraceEntry(
                str(e["pass_name"]),
                int(e["fired_at"]),
                tuple((int(x["index"]), decode_command(x["old"], k),
                       decode_command(x["new"], k, allow_noop=True)) for x in e["edits"]),
                tuple((int(x["index"]), decode_command(x["command"], k)) for x in e["inserted"]),
                int(e["before_snapshot_id"]),
                int(e["after_snapshot_id"]),
            ))
        apps = [Application(str(a["pass_name"]), int(a["iteration"]), int(a["before_snapshot_id"]),
                            int(a["after_snapshot_id"]), tuple(int(x) for x in a["entries"]))
                for a in doc["applications"]]
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, FormatError):
            raise
        raise SchemaError("$", f"malformed trace: {e!r}") from None
    return RewriteTrace.from_parts(snapshots, entries, apps)


def load_trace(data: bytes | str) -> RewriteTrace:
    try:
        doc = json.loads(data)
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise SchemaError("$", f"invalid JSON: {e}") from None
    return trace_from_json(doc)


class TraceVersionSkew(FormatError):
    def __init__(self, schema):
        self.schema = schema
        super().__init__(f"unsupported trace schema {schema!r}")
