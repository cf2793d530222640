"""Command-line entry point.

Subcommands: enumerate (run any algorithm over a context file), split
(write a partition manifest), verify (randomized cross-checks against the
brute-force oracle), bench (timing matrix), worker (socket worker).

Exit codes: 0 success, 1 runtime failure, 2 usage error. Run reports are
JSON, schema-tagged, written to stderr unless --report names a file.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io as stringio
import json
import random
import statistics
import sys
import time
from pathlib import Path

from . import __version__
from .algorithms import close_by_one, iter_concepts
from .core import (
    AttributeSet,
    Concept,
    ContractViolation,
    FormalContext,
    ObjectSet,
    closure_mask,
    derive_objects_mask,
)
from .io import (
    CONCEPT_FORMATS,
    CONTEXT_FORMATS,
    ParseError,
    load_context,
    write_concepts,
    write_cxt,
)
from .mr import DRIVERS, IntegrityError
from .oracle import MAX_ATTRIBUTES, brute_force_concepts, random_context
from .partition import save_manifest, split
from .runtime import (
    DEFAULT_MAX_ITERATIONS,
    MAP_REGISTRY,
    IterationGuardExceeded,
    WorkerError,
    configure,
)
from .wire import serve

REPORT_SCHEMA = "fcamr.report/1"
CENTRAL_ALGOS = ("nextclosure", "cbo", "oracle")
ALGO_CHOICES = CENTRAL_ALGOS + tuple(sorted(DRIVERS))
VERIFY_ALGOS = ("nextclosure", "cbo") + tuple(sorted(DRIVERS))
FAULT_CHOICES = ("none", "skip-canonicity")


class UsageError(Exception):
    """Bad request that argparse could not catch on its own."""


def _emit_report(report: dict, path: str | None) -> None:
    text = json.dumps(report, indent=2 if path else None)
    if path:
        Path(path).write_text(text + "\n", encoding="utf-8")
    else:
        print(text, file=sys.stderr)


def _parse_addresses(raw: str) -> list[str]:
    return [addr.strip() for addr in raw.split(",") if addr.strip()]


def _enumerate_once(
    ctx: FormalContext,
    algo: str,
    *,
    partitions: int = 1,
    strategy: str = "contiguous",
    workers: int = 1,
    mode: str = "local",
    addresses: list[str] | None = None,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
) -> tuple[list[Concept], dict]:
    """Run one enumeration; returns the concepts and report fields."""
    if algo == "oracle":
        return brute_force_concepts(ctx), {}
    if algo == "nextclosure":
        return list(iter_concepts(ctx)), {}
    if algo == "cbo":
        result = close_by_one(ctx)
        return list(result.concepts), {"depth": result.depth}
    if algo not in DRIVERS:
        raise UsageError(f"unknown algorithm {algo!r}")
    if partitions < 1:
        raise UsageError("--partitions must be at least 1")
    if mode == "socket" and not addresses:
        raise UsageError("--mode socket requires --workers-addr")
    parts = split(ctx, partitions, strategy=strategy)
    with configure(parts, workers=workers, mode=mode, addresses=addresses) as handle:
        result = DRIVERS[algo](parts, handle, max_iterations=max_iterations)
    extra = {
        "partitions": partitions,
        "strategy": strategy,
        "workers": workers,
        "mode": mode,
        "iterations": result.productive_iterations,
        "iterations_dispatched": result.iterations,
        "batch_sizes": [len(b) for b in result.batches],
    }
    return result.concepts, extra


def cmd_enumerate(args) -> int:
    ctx = load_context(args.input, args.format)
    if args.attr_order == "support":
        ctx = ctx.with_attribute_order(ctx.support_order())
    started = time.perf_counter()
    concepts, extra = _enumerate_once(
        ctx,
        args.algo,
        partitions=args.partitions,
        strategy=args.strategy,
        workers=args.workers,
        mode=args.mode,
        addresses=_parse_addresses(args.workers_addr),
        max_iterations=args.max_iterations,
    )
    elapsed = time.perf_counter() - started
    count = write_concepts(
        ctx, concepts, args.out_format, args.out if args.out else sys.stdout
    )
    report = {
        "schema": REPORT_SCHEMA,
        "command": "enumerate",
        "input": str(args.input),
        "algo": args.algo,
        "objects": ctx.object_count,
        "attributes": ctx.attribute_count,
        "attribute_order": args.attr_order,
        "concepts": count,
        "iterations": None,
        "wall_seconds": round(elapsed, 6),
    }
    report.update(extra)
    _emit_report(report, args.report)
    return 0


def cmd_split(args) -> int:
    ctx = load_context(args.input, args.format)
    parts = split(ctx, args.partitions, strategy=args.strategy)
    save_manifest(parts, args.out, strategy=args.strategy)
    report = {
        "schema": REPORT_SCHEMA,
        "command": "split",
        "input": str(args.input),
        "partitions": args.partitions,
        "strategy": args.strategy,
        "sizes": [p.local_ctx.object_count for p in parts],
        "manifest": str(args.out),
    }
    _emit_report(report, args.report)
    return 0


# --- verify -------------------------------------------------------------------

def _fingerprint(ctx: FormalContext) -> str:
    sink = stringio.StringIO()
    write_cxt(ctx, sink)
    return hashlib.sha256(sink.getvalue().encode("utf-8")).hexdigest()[:12]


def _broken_scan(ctx: FormalContext) -> list[Concept]:
    """Enumerator with the canonicity test removed, on purpose.

    Used by --inject-fault to prove the verifier actually catches a wrong
    implementation instead of rubber-stamping whatever runs.
    """
    m = ctx.attribute_count
    n = ctx.object_count
    full = (1 << m) - 1

    def as_concept(intent: int) -> Concept:
        return Concept(
            ObjectSet(n, derive_objects_mask(ctx, intent)),
            AttributeSet(m, intent),
        )

    y = closure_mask(ctx, 0)
    found = [as_concept(y)]
    guard = 1 << m
    while y != full and guard:
        guard -= 1
        for i in range(m - 1, -1, -1):
            if y >> i & 1:
                continue
            y = closure_mask(ctx, (y & ((1 << i) - 1)) | 1 << i)
            break
        found.append(as_concept(y))
    return found


def _verify_case(ctx, algo, n, strategy, inject_fault):
    if inject_fault == "skip-canonicity" and algo == "nextclosure":
        return _broken_scan(ctx)
    concepts, _ = _enumerate_once(ctx, algo, partitions=n, strategy=strategy)
    return concepts


def run_verification(
    trials: int,
    seed: int,
    max_attrs: int,
    max_objects: int = 12,
    inject_fault: str = "none",
    extra_context: FormalContext | None = None,
) -> dict:
    """Randomized equivalence sweep; the report carries any failures."""
    rng = random.Random(seed)
    cases: list[tuple[str, FormalContext]] = []
    if extra_context is not None:
        cases.append(("input", extra_context))
    for t in range(trials):
        cases.append(
            (
                f"trial-{t}",
                random_context(rng, max_objects=max_objects, max_attributes=max_attrs),
            )
        )
    fingerprints = []
    failures = []
    first_bad: FormalContext | None = None
    for label, ctx in cases:
        fingerprints.append(_fingerprint(ctx))
        n = rng.randint(1, min(4, max(1, ctx.object_count)))
        strategy = rng.choice(("contiguous", "round_robin"))
        if ctx.attribute_count <= MAX_ATTRIBUTES:
            expected = {
                (c.extent.mask, c.intent.mask) for c in brute_force_concepts(ctx)
            }
            reference = "oracle"
        else:
            expected = {
                (c.extent.mask, c.intent.mask) for c in iter_concepts(ctx)
            }
            reference = "nextclosure"
        for algo in VERIFY_ALGOS:
            got = {
                (c.extent.mask, c.intent.mask)
                for c in _verify_case(ctx, algo, n, strategy, inject_fault)
            }
            if got != expected:
                failures.append(
                    {
                        "case": label,
                        "algo": algo,
                        "reference": reference,
                        "partitions": n,
                        "strategy": strategy,
                        "missing": len(expected - got),
                        "unexpected": len(got - expected),
                    }
                )
                if first_bad is None:
                    first_bad = ctx
    report = {
        "schema": REPORT_SCHEMA,
        "command": "verify",
        "cases": len(cases),
        "seed": seed,
        "max_attrs": max_attrs,
        "inject_fault": inject_fault,
        "fingerprints": fingerprints,
        "failures": failures,
    }
    if first_bad is not None:
        sink = stringio.StringIO()
        write_cxt(first_bad, sink)
        report["counterexample"] = sink.getvalue()
    return report


def cmd_verify(args) -> int:
    extra = load_context(args.input, args.format) if args.input else None
    report = run_verification(
        args.trials,
        args.seed,
        args.max_attrs,
        max_objects=args.max_objects,
        inject_fault=args.inject_fault,
        extra_context=extra,
    )
    _emit_report(report, args.report)
    if report["failures"]:
        print(
            f"verify: {len(report['failures'])} failing run(s); "
            "first counterexample context follows",
            file=sys.stderr,
        )
        print(report["counterexample"], file=sys.stderr)
        return 1
    return 0


# --- bench --------------------------------------------------------------------

def _int_list(raw: str, flag: str) -> list[int]:
    try:
        values = [int(tok) for tok in raw.split(",") if tok.strip()]
    except ValueError:
        raise UsageError(f"{flag} expects comma-separated integers, got {raw!r}")
    if not values:
        raise UsageError(f"{flag} must name at least one value")
    return values


def cmd_bench(args) -> int:
    ctx = load_context(args.input, args.format)
    algos = [a.strip() for a in args.algos.split(",") if a.strip()]
    for algo in algos:
        if algo not in ALGO_CHOICES:
            raise UsageError(f"unknown algorithm {algo!r}")
    partition_counts = _int_list(args.partitions, "--partitions")
    worker_counts = _int_list(args.workers, "--workers")
    rows = []
    for algo in algos:
        grid = (
            [(n, w) for n in partition_counts for w in worker_counts]
            if algo in DRIVERS
            else [(1, 1)]
        )
        for n, w in grid:
            timings = []
            concepts = iterations = None
            for _ in range(args.repeat):
                started = time.perf_counter()
                found, extra = _enumerate_once(
                    ctx,
                    algo,
                    partitions=n,
                    workers=w,
                    strategy=args.strategy,
                    max_iterations=args.max_iterations,
                )
                timings.append(time.perf_counter() - started)
                concepts = len(found)
                iterations = extra.get("iterations")
            rows.append(
                {
                    "algo": algo,
                    "partitions": n,
                    "workers": w,
                    "concepts": concepts,
                    "iterations": iterations,
                    "median_seconds": round(statistics.median(timings), 6),
                    "repeat": args.repeat,
                }
            )
    if args.report_format == "json":
        payload = json.dumps(
            {"schema": "fcamr.bench/1", "input": str(args.input), "rows": rows},
            indent=2,
        )
        if args.report:
            Path(args.report).write_text(payload + "\n", encoding="utf-8")
        else:
            print(payload)
        return 0
    sink = open(args.report, "w", encoding="utf-8", newline="") if args.report else sys.stdout
    try:
        writer = csv.DictWriter(
            sink,
            fieldnames=[
                "algo", "partitions", "workers", "concepts",
                "iterations", "median_seconds", "repeat",
            ],
            lineterminator="\n",
        )
        writer.writeheader()
        writer.writerows(rows)
    finally:
        if sink is not sys.stdout:
            sink.close()
    return 0


def cmd_worker(args) -> int:
    return serve(args.listen, MAP_REGISTRY)


# --- parser -------------------------------------------------------------------

def _add_input_flags(sub) -> None:
    sub.add_argument("--input", required=True, help="context file (.cxt/.fimi/.dat/.csv, .gz ok)")
    sub.add_argument(
        "--format", default="auto", choices=("auto",) + CONTEXT_FORMATS,
        help="input format (default: infer from the suffix)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fcamr",
        description="Formal concept enumeration, centralized or map-reduce style.",
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    sub = parser.add_subparsers(dest="command", metavar="command")

    enum = sub.add_parser("enumerate", help="enumerate the concepts of a context")
    _add_input_flags(enum)
    enum.add_argument("--algo", default="nextclosure", choices=ALGO_CHOICES)
    enum.add_argument("--partitions", type=int, default=1)
    enum.add_argument(
        "--strategy", default="contiguous", choices=("contiguous", "round_robin")
    )
    enum.add_argument("--workers", type=int, default=1)
    enum.add_argument("--mode", default="local", choices=("local", "socket"))
    enum.add_argument(
        "--workers-addr", default="",
        help="comma-separated host:port list of running workers (socket mode)",
    )
    enum.add_argument("--attr-order", default="file", choices=("file", "support"))
    enum.add_argument("--max-iterations", type=int, default=DEFAULT_MAX_ITERATIONS)
    enum.add_argument("--out", default=None, help="concept output path (default stdout)")
    enum.add_argument("--out-format", default="count_only", choices=CONCEPT_FORMATS)
    enum.add_argument("--report", default=None, help="write the JSON report here instead of stderr")
    enum.set_defaults(func=cmd_enumerate)

    sp = sub.add_parser("split", help="write a partition manifest")
    _add_input_flags(sp)
    sp.add_argument("--partitions", type=int, required=True)
    sp.add_argument(
        "--strategy", default="contiguous", choices=("contiguous", "round_robin")
    )
    sp.add_argument("--out", required=True, help="manifest path")
    sp.add_argument("--report", default=None)
    sp.set_defaults(func=cmd_split)

    ver = sub.add_parser(
        "verify", help="cross-check every algorithm against the oracle on random contexts"
    )
    ver.add_argument("--input", default=None, help="also verify this context file")
    ver.add_argument("--format", default="auto", choices=("auto",) + CONTEXT_FORMATS)
    ver.add_argument("--trials", type=int, default=20)
    ver.add_argument("--seed", type=int, default=0)
    ver.add_argument("--max-attrs", type=int, default=14)
    ver.add_argument("--max-objects", type=int, default=12)
    ver.add_argument(
        "--inject-fault", default="none", choices=FAULT_CHOICES,
        help="deliberately break one enumerator to confirm detection",
    )
    ver.add_argument("--report", default=None)
    ver.set_defaults(func=cmd_verify)

    bench = sub.add_parser("bench", help="timing matrix over algorithms x partitions x workers")
    _add_input_flags(bench)
    bench.add_argument("--algos", default="nextclosure,cbo,mrganter+,mrcbo")
    bench.add_argument("--partitions", default="1,2")
    bench.add_argument("--workers", default="1")
    bench.add_argument(
        "--strategy", default="contiguous", choices=("contiguous", "round_robin")
    )
    bench.add_argument("--repeat", type=int, default=3)
    bench.add_argument("--max-iterations", type=int, default=DEFAULT_MAX_ITERATIONS)
    bench.add_argument("--report", default=None, help="output path (default stdout)")
    bench.add_argument("--report-format", default="csv", choices=("csv", "json"))
    bench.set_defaults(func=cmd_bench)

    worker = sub.add_parser("worker", help="serve map tasks over a socket until SHUTDOWN")
    worker.add_argument("--listen", required=True, help="host:port; port 0 picks a free port")
    worker.set_defaults(func=cmd_worker)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not hasattr(args, "func"):
        parser.print_usage(sys.stderr)
        return 2
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"fcamr: error: {exc}", file=sys.stderr)
        return 2
    except ParseError as exc:
        print(f"fcamr: cannot parse input: {exc}", file=sys.stderr)
        return 1
    except (ContractViolation, IntegrityError, IterationGuardExceeded, WorkerError) as exc:
        print(f"fcamr: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"fcamr: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"fcamr: error: {exc}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        return 130
