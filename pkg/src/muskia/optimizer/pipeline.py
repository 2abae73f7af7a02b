"""Pass scheduling: the fixed pipeline repeated until nothing changes."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

from ..commands import Program, check_balanced
from .buffer import RecordBuffer
from .harness import transform
from .passes import PASSES
from .rewrites import PASS_ORDER
from .trace import RawApplication, RewriteTrace

log = logging.getLogger(__name__)

ENGINES = ("auto", "reference", "compiled")

#: Small programs stay on the interpreted engine so they never wait on a cold JIT compile.
AUTO_COMPILED_MIN_RECORDS = 256


@dataclass(frozen=True)
class OptimizeConfig:
    passes: tuple = PASS_ORDER
    max_iterations: int = 4
    engine: str = "auto"

    def __post_init__(self):
        unknown = [p for p in self.passes if p not in PASS_ORDER]
        if unknown:
            raise ValueError(f"unknown passes {unknown}; choose from {list(PASS_ORDER)}")
        if self.engine not in ENGINES:
            raise ValueError(f"unknown engine {self.engine!r}")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")

    @property
    def ordered_passes(self) -> tuple:
        """Selected passes, always in pipeline order."""
        return tuple(p for p in PASS_ORDER if p in self.passes)


def parse_passes(spec: str) -> tuple:
    names = tuple(s.strip() for s in spec.split(",") if s.strip())
    if not names:
        raise ValueError("empty pass list")
    return names


def _snapshot(buf: RecordBuffer) -> tuple:
    return list(buf.records), list(buf.insertions)


def optimize_reference(program: Program, config: OptimizeConfig) -> tuple:
    buf = RecordBuffer.from_program(program)
    raw: list = []
    for iteration in range(1, config.max_iterations + 1):
        changed = False
        for name in config.ordered_passes:
            before = _snapshot(buf)
            firings, _ = transform(PASSES[name](), buf, check=False)
            if firings:
                changed = True
                raw.append(RawApplication(name, iteration, *before, *_snapshot(buf), firings))
        buf.merge_insertions()
        buf.compact()
        if not changed:
            break
    return Program(buf.records), RewriteTrace(program, raw)


def optimize(program: Program | Sequence, config: OptimizeConfig | None = None) -> tuple:
    """Run the pass pipeline to a fixpoint (or the iteration cap).

    Returns the optimized program and the trace of every pass application
    that changed it.
    """
    config = config or OptimizeConfig()
    if not isinstance(program, Program):
        program = Program(program)
    engine = config.engine
    if engine == "auto":
        engine = "compiled" if len(program) >= AUTO_COMPILED_MIN_RECORDS else "reference"
    if engine == "compiled":
        from .compiled import CompiledUnavailable, optimize_compiled
        try:
            return optimize_compiled(program, config)
        except CompiledUnavailable as e:
            if config.engine == "compiled":
                raise
            log.info("falling back to the reference engine: %s", e)
    check_balanced(program.records)
    return optimize_reference(program, config)
