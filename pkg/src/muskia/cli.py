"""Command-line entry points.

Exit codes: 0 success, 1 a check came back negative (validate, diff),
2 an input failed to parse or validate, 3 an I/O error.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import statistics
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .commands import Program, UnbalancedError
from .corpus import FAMILIES, generate_buffer, generate_corpus
from .optimizer import PASS_ORDER, OptimizeConfig, cost_metrics, optimize, parse_passes, speedup_proxy
from .optimizer.pipeline import ENGINES
from .raster import DimensionMismatch, decode_ppm, encode_ppm, image_diff_ae, rasterize
from .skplite import FormatError, load_program, save_program
from .validator import INCONCLUSIVE, VALIDATED, ValidateConfig, validate_text

log = logging.getLogger("muskia")

EXIT_OK, EXIT_NEGATIVE, EXIT_INPUT, EXIT_IO = 0, 1, 2, 3

SCHEMAS = {
    "optimize": "muskia-optimize/1",
    "bench": "muskia-bench/1",
    "stats": "muskia-stats/1",
    "diff": "muskia-diff/1",
    "corpus": "muskia-corpus/1",
}

MIN_REPS = 10


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _seed(flag: Optional[int]) -> int:
    """Explicit flag, else MUSKIA_SEED, else 0."""
    if flag is not None:
        return flag
    env = os.environ.get("MUSKIA_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise CliError(EXIT_INPUT, f"MUSKIA_SEED must be an integer, got {env!r}") from None


def _read(path: str) -> bytes:
    try:
        if path == "-":
            return sys.stdin.buffer.read()
        return Path(path).read_bytes()
    except OSError as e:
        raise CliError(EXIT_IO, f"{path}: {e.strerror or e}") from None


def _write(path: str, data: bytes) -> None:
    try:
        if path == "-":
            sys.stdout.buffer.write(data)
            sys.stdout.flush()
        else:
            Path(path).write_bytes(data)
    except OSError as e:
        raise CliError(EXIT_IO, f"{path}: {e.strerror or e}") from None


def _load(path: str) -> Program:
    data = _read(path)
    try:
        return load_program(data)
    except FormatError as e:
        raise CliError(EXIT_INPUT, f"{path}: {e}") from None


def _load_many(paths: Sequence[str], jobs: int) -> list:
    if len(paths) <= 1 or jobs <= 1:
        return [_load(p) for p in paths]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_load, paths))


def _emit(doc: dict, out: Optional[str] = None) -> None:
    text = json.dumps(doc, indent=2) + "\n"
    if out and out != "-":
        _write(out, text.encode())
    else:
        sys.stdout.write(text)


def _expand(inputs: Sequence[str]) -> list:
    """Directories contribute their ``*.json`` files, sorted."""
    out = []
    for item in inputs:
        p = Path(item)
        if p.is_dir():
            out.extend(str(f) for f in sorted(p.glob("*.json")) if f.name != "manifest.json")
        else:
            out.append(item)
    return out


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_render(args) -> int:
    program = _load(args.input)
    img = rasterize(program, args.width, args.height)
    _write(args.out, encode_ppm(img))
    return EXIT_OK


def cmd_optimize(args) -> int:
    program = _load(args.input)
    try:
        config = OptimizeConfig(passes=parse_passes(args.passes) if args.passes else PASS_ORDER,
                                max_iterations=args.max_iters, engine=args.engine)
    except ValueError as e:
        raise CliError(EXIT_INPUT, str(e)) from None
    out, trace = optimize(program, config)
    if args.out:
        _write(args.out, save_program(out, indent=None))
    if args.trace:
        _write(args.trace, trace.dumps().encode())
    before = cost_metrics(program, args.width, args.height)
    after = cost_metrics(out, args.width, args.height)
    doc = {
        "schema": SCHEMAS["optimize"],
        "input": args.input,
        "records_before": len(program),
        "records_after": len(out),
        "firings": trace.firing_counts(),
        "iterations": trace.iterations,
        "metrics_before": before.to_json(),
        "metrics_after": after.to_json(),
        "speedup_proxy": speedup_proxy(before, after),
    }
    if args.out == "-":
        sys.stderr.write(json.dumps(doc, indent=2) + "\n")
    else:
        _emit(doc)
    return EXIT_OK


def cmd_validate(args) -> int:
    data = _read(args.trace)
    config = ValidateConfig(resolution=args.resolution, samples=args.samples, seed=_seed(args.seed))
    verdict = validate_text(data, config)
    _emit(verdict.to_json(), args.out)
    if args.summary:
        sys.stderr.write(verdict.summary() + "\n")
    if verdict.overall == VALIDATED:
        return EXIT_OK
    return EXIT_INPUT if verdict.overall == INCONCLUSIVE else EXIT_NEGATIVE


def _image(path: str, width: int, height: int):
    data = _read(path)
    if data[:2] == b"P6":
        try:
            return decode_ppm(data)
        except ValueError as e:
            raise CliError(EXIT_INPUT, f"{path}: {e}") from None
    try:
        return rasterize(load_program(data), width, height)
    except FormatError as e:
        raise CliError(EXIT_INPUT, f"{path}: {e}") from None


def cmd_diff(args) -> int:
    a = _image(args.a, args.width, args.height)
    b = _image(args.b, args.width, args.height)
    try:
        rep = image_diff_ae(a, b, args.fuzz)
    except DimensionMismatch as e:
        raise CliError(EXIT_INPUT, f"image sizes differ: {e}") from None
    if args.json:
        _emit({"schema": SCHEMAS["diff"], "fuzz": args.fuzz, **rep.to_json()})
    else:
        print(rep.differing_pixels)
        print(f"max_channel_delta {rep.max_channel_delta:.9g}")
    return EXIT_OK if rep.differing_pixels == 0 else EXIT_NEGATIVE


def cmd_stats(args) -> int:
    paths = _expand(args.inputs)
    programs = _load_many(paths, args.jobs)
    rows = [{"input": p, "records": len(prog),
             "metrics": cost_metrics(prog, args.width, args.height).to_json()}
            for p, prog in zip(paths, programs)]
    _emit({"schema": SCHEMAS["stats"], "width": args.width, "height": args.height,
           "programs": rows})
    return EXIT_OK


def cmd_corpus(args) -> int:
    seed = _seed(args.seed)
    entries = generate_corpus(seed, args.count, size=args.size)
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise CliError(EXIT_IO, f"{out}: {e.strerror or e}") from None
    manifest = []
    for e in entries:
        _write(str(out / f"{e.name}.json"), save_program(e.program, indent=None))
        manifest.append({"name": e.name, "family": e.family, "variant": e.variant,
                         "records": len(e.program), "expected": e.expected})
    _emit({"schema": SCHEMAS["corpus"], "seed": seed, "count": len(entries), "size": args.size,
           "programs": manifest}, str(out / "manifest.json"))
    print(f"wrote {len(entries)} programs to {out}")
    return EXIT_OK


def _time_optimize(program: Program, config: OptimizeConfig, reps: int, warmup: int) -> tuple:
    """(cold ns, median warm ns, result, trace).  Only the optimize call is timed."""
    t0 = time.perf_counter_ns()
    out, trace = optimize(program, config)
    cold = time.perf_counter_ns() - t0
    for _ in range(warmup):
        optimize(program, config)
    samples = []
    for _ in range(reps):
        t0 = time.perf_counter_ns()
        optimize(program, config)
        samples.append(time.perf_counter_ns() - t0)
    return cold, int(statistics.median(samples)), out, trace


def bench_programs(named: Sequence[tuple], config: OptimizeConfig, reps: int = MIN_REPS,
                   warmup: int = 2, width: int = 256, height: int = 256) -> dict:
    if reps < MIN_REPS:
        raise ValueError(f"at least {MIN_REPS} repetitions are required")
    rows = []
    for name, program in named:
        cold, median, out, trace = _time_optimize(program, config, reps, warmup)
        before = cost_metrics(program, width, height)
        after = cost_metrics(out, width, height)
        rows.append({
            "name": name,
            "records": len(program),
            "optimize_time_ns": median,
            "cold_time_ns": cold,
            "firings": sum(trace.firing_counts().values()),
            "metrics_before": before.to_json(),
            "metrics_after": after.to_json(),
            "speedup_proxy": speedup_proxy(before, after),
        })
    finite = [r["speedup_proxy"] for r in rows if 0 < r["speedup_proxy"] < math.inf]
    geomean = math.exp(statistics.fmean(math.log(s) for s in finite)) if finite else None
    return {
        "schema": SCHEMAS["bench"],
        "version": __version__,
        "reps": reps,
        "warmup": warmup,
        "engine": config.engine,
        "clock": "time.perf_counter_ns",
        "viewport": [width, height],
        "programs": rows,
        "aggregate": {"programs": len(rows), "geomean_speedup_proxy": geomean},
    }


def cmd_bench(args) -> int:
    if args.reps < MIN_REPS:
        raise CliError(EXIT_INPUT, f"--reps must be at least {MIN_REPS}")
    seed = _seed(args.seed)
    paths = _expand(args.inputs)
    named = list(zip(paths, _load_many(paths, args.jobs)))
    if args.corpus:
        named += [(e.name, e.program) for e in generate_corpus(seed, args.corpus)]
    for n in args.buffer or ():
        named.append((f"buffer-{n}", generate_buffer(n, seed)))
    if not named:
        raise CliError(EXIT_INPUT, "nothing to bench: give input files, --corpus or --buffer")
    config = OptimizeConfig(engine=args.engine)
    report = bench_programs(named, config, args.reps, args.warmup, args.width, args.height)
    report["seed"] = seed
    if args.figures:
        from .plotting import write_bench_figures
        try:
            report["figures"] = write_bench_figures(report, args.figures)
        except OSError as e:
            raise CliError(EXIT_IO, f"{args.figures}: {e.strerror or e}") from None
    _emit(report, args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _viewport(p: argparse.ArgumentParser) -> None:
    p.add_argument("--width", type=int, default=256)
    p.add_argument("--height", type=int, default=256)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="muskia", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("render", help="rasterize a program to PPM")
    p.add_argument("input")
    p.add_argument("--out", "-o", default="-")
    _viewport(p)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("optimize", help="run the rewrite pipeline")
    p.add_argument("input")
    p.add_argument("--out", "-o")
    p.add_argument("--trace")
    p.add_argument("--passes", help="comma-separated subset, applied in pipeline order")
    p.add_argument("--max-iters", type=int, default=4)
    p.add_argument("--engine", choices=ENGINES, default="auto")
    _viewport(p)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("validate", help="translation-validate a rewrite trace")
    p.add_argument("trace")
    p.add_argument("--resolution", type=int, default=256)
    p.add_argument("--samples", type=int, default=4096)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", "-o")
    p.add_argument("--summary", action="store_true", help="also print a readable summary to stderr")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("diff", help="count differing pixels between two images or programs")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--fuzz", type=float, default=0.01)
    p.add_argument("--json", action="store_true")
    _viewport(p)
    p.set_defaults(func=cmd_diff)

    p = sub.add_parser("bench", help="time the optimizer and report the cost proxy")
    p.add_argument("inputs", nargs="*")
    p.add_argument("--reps", type=int, default=MIN_REPS)
    p.add_argument("--warmup", type=int, default=2)
    p.add_argument("--corpus", type=int, default=0, help="also bench this many generated programs")
    p.add_argument("--buffer", type=int, action="append", help="also bench a generated buffer")
    p.add_argument("--seed", type=int)
    p.add_argument("--engine", choices=ENGINES, default="auto")
    p.add_argument("--figures", help="directory for PNG figures")
    p.add_argument("--out", "-o")
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    _viewport(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("stats", help="print cost metrics")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    _viewport(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("corpus", help=f"write a generated corpus ({', '.join(FAMILIES)})")
    p.add_argument("--out", "-o", required=True)
    p.add_argument("--count", type=int, default=90)
    p.add_argument("--seed", type=int)
    p.add_argument("--size", type=int, default=256)
    p.set_defaults(func=cmd_corpus)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as e:
        print(f"muskia {args.command}: {e}", file=sys.stderr)
        return e.code
    except UnbalancedError as e:
        print(f"muskia {args.command}: unbalanced program: {e}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as e:
        print(f"muskia {args.command}: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
