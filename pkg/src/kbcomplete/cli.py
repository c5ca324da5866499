"""Command-line front ends.

``kbcomplete`` runs one problem file; ``kbcomplete-bench`` runs a set of
problems under all eight combinations of the three performance flags and
reports completed counts and timings per configuration.

Exit codes: 0 completion succeeded, 1 completion failed, 2 timeout,
3 usage error, 4 unreadable or malformed input, 5 runtime error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from kbcomplete.completion import (
    Backend,
    Config,
    SoundnessError,
    Success,
    Timeout,
    complete,
)
from kbcomplete.orders import ExternalToolError
from kbcomplete.proof import build_trace, to_xml
from kbcomplete.terms import pair_key
from kbcomplete.tpdb import (
    ParseError,
    format_problem,
    format_trs,
    parse_problem,
)
from kbcomplete.trs import StepBoundExceededError

EXIT_SUCCESS = 0
EXIT_FAIL = 1
EXIT_TIMEOUT = 2
EXIT_USAGE = 3
EXIT_INPUT = 4
EXIT_ERROR = 5

TOOL_NAME = "kbcomplete"

#: The eight flag columns of the benchmark grid, most-disabled first.
#: Suffix letters follow the single-problem CLI: -b no caching, -i no
#: indexing, -u no parallelization.
GRID_COLUMNS: tuple[tuple[str, tuple[bool, bool, bool]], ...] = (
    ("-b-i-u", (False, False, False)),
    ("-i-u", (True, False, False)),
    ("-b-u", (False, True, False)),
    ("-b-i", (False, False, True)),
    ("-u", (True, True, False)),
    ("-i", (True, False, True)),
    ("-b", (False, True, True)),
    ("", (True, True, True)),
)


class _ArgumentParser(argparse.ArgumentParser):
    # argparse exits with status 2 by default, which is reserved for
    # completion timeouts here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_int(text: str) -> int:
    value = int(text)
    if value <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return value


def _backend_from_method(method: str) -> Backend:
    if method in ("lpo", "kbo"):
        return Backend(kind=method)
    return Backend(kind="external", command=method)


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(
        prog=TOOL_NAME,
        description="Complete a set of equations into a convergent "
        "term rewrite system.",
    )
    parser.add_argument(
        "input", help="problem file in (VAR ...) (RULES ...) format"
    )
    parser.add_argument(
        "-a",
        "--automatic",
        action="store_true",
        help="run automatic completion (default: parse and echo the input)",
    )
    parser.add_argument(
        "-p",
        "--proof",
        action="store_true",
        help="also print the replayable proof trace on stdout",
    )
    parser.add_argument(
        "-s",
        "--timeout",
        type=_positive_int,
        default=600,
        metavar="SECONDS",
        help="wall-clock budget for the run (default 600)",
    )
    parser.add_argument(
        "-m",
        "--method",
        default="lpo",
        metavar="METHOD",
        help='termination-check method: "lpo", "kbo", or an external '
        "command that reads a rule set on stdin and prints YES/NO/MAYBE "
        '(default "lpo")',
    )
    parser.add_argument(
        "-b",
        "--no-cache",
        action="store_true",
        help="disable result caching",
    )
    parser.add_argument(
        "-i",
        "--no-index",
        action="store_true",
        help="disable discrimination-tree term indexing",
    )
    parser.add_argument(
        "-u",
        "--no-parallel",
        action="store_true",
        help="disable phase-internal parallelization",
    )
    parser.add_argument(
        "--workers",
        type=_positive_int,
        default=None,
        metavar="N",
        help="worker process count (default: $KBCOMPLETE_WORKERS or all "
        "available processors)",
    )
    return parser


def config_from_args(args: argparse.Namespace) -> Config:
    return Config(
        backend=_backend_from_method(args.method),
        caching=not args.no_cache,
        indexing=not args.no_index,
        parallel=not args.no_parallel,
        workers=args.workers,
        timeout=float(args.timeout),
    )


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text = Path(args.input).read_text()
    except OSError as err:
        print(f"{TOOL_NAME}: cannot read {args.input}: {err}", file=sys.stderr)
        return EXIT_INPUT
    try:
        problem = parse_problem(text)
    except ParseError as err:
        print(f"{TOOL_NAME}: {args.input}: {err}", file=sys.stderr)
        return EXIT_INPUT
    if not args.automatic:
        sys.stdout.write(format_problem(problem))
        return EXIT_SUCCESS
    try:
        result = complete(problem.equations, config_from_args(args))
    except (StepBoundExceededError, SoundnessError, ExternalToolError) as err:
        print(f"{TOOL_NAME}: aborted: {err}", file=sys.stderr)
        return EXIT_ERROR
    if isinstance(result, Success):
        sys.stdout.write(
            format_trs(
                [(r.lhs, r.rhs) for r in result.rules], problem.var_names()
            )
        )
        if args.proof:
            sys.stdout.write(to_xml(build_trace(result.state)))
        return EXIT_SUCCESS
    if isinstance(result, Timeout):
        print(f"{TOOL_NAME}: timeout after {args.timeout}s", file=sys.stderr)
        return EXIT_TIMEOUT
    print(f"{TOOL_NAME}: failed: unorientable equations remain", file=sys.stderr)
    return EXIT_FAIL


# ---------------------------------------------------------------------------
# Benchmark grid


@dataclass
class RunRecord:
    input: str
    verdict: str
    seconds: float
    system_digest: str | None = None


@dataclass
class BenchCell:
    label: str
    runs: list[RunRecord] = field(default_factory=list)

    @property
    def completed(self) -> int:
        return sum(1 for r in self.runs if r.verdict == "success")

    @property
    def total_time(self) -> float:
        return sum(r.seconds for r in self.runs if r.verdict == "success")

    @property
    def avg_time(self) -> float:
        done = self.completed
        return self.total_time / done if done else 0.0


@dataclass
class BenchReport:
    columns: tuple[str, ...]
    cells: dict[str, BenchCell]

    def render_text(self) -> str:
        width = max(12, max((len(c) for c in self.columns), default=12) + 2)
        header = " " * 12 + "".join(c.rjust(width) for c in self.columns)
        rows = [
            ("completed", lambda cell: str(cell.completed)),
            ("total time", lambda cell: f"{cell.total_time:.1f}"),
            ("avg. time", lambda cell: f"{cell.avg_time:.1f}"),
        ]
        lines = [header]
        for title, fmt in rows:
            lines.append(
                title.ljust(12)
                + "".join(fmt(self.cells[c]).rjust(width) for c in self.columns)
            )
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        payload = {
            "columns": list(self.columns),
            "cells": {
                label: {
                    "completed": cell.completed,
                    "total_time": cell.total_time,
                    "avg_time": cell.avg_time,
                    "runs": [
                        {
                            "input": r.input,
                            "verdict": r.verdict,
                            "seconds": r.seconds,
                            "system_digest": r.system_digest,
                        }
                        for r in cell.runs
                    ],
                }
                for label, cell in self.cells.items()
            },
        }
        return json.dumps(payload, indent=2) + "\n"


def _system_digest(result) -> str | None:
    if not isinstance(result, Success):
        return None
    keys = sorted(repr(pair_key(r.lhs, r.rhs)) for r in result.rules)
    return hashlib.sha256("\n".join(keys).encode()).hexdigest()


def _bench_one(
    path: Path, flags: tuple[bool, bool, bool], timeout: float, backend: Backend
) -> RunRecord:
    caching, indexing, parallel = flags
    try:
        problem = parse_problem(path.read_text())
    except (OSError, ParseError) as err:
        return RunRecord(str(path), f"error: {err}", 0.0)
    config = Config(
        backend=backend,
        caching=caching,
        indexing=indexing,
        parallel=parallel,
        timeout=timeout,
    )
    start = time.perf_counter()
    try:
        result = complete(problem.equations, config)
    except (StepBoundExceededError, SoundnessError, ExternalToolError) as err:
        return RunRecord(str(path), f"error: {err}", time.perf_counter() - start)
    elapsed = time.perf_counter() - start
    return RunRecord(str(path), result.verdict, elapsed, _system_digest(result))


def bench_grid(
    inputs: list[Path],
    timeout: float,
    backend: Backend = Backend(),
    concurrent_cells: bool = False,
) -> BenchReport:
    """Run every input under all eight flag configurations.

    Cells run sequentially by default so that timings do not contend;
    ``concurrent_cells`` trades timing fidelity for wall-clock speed and
    is meant for smoke testing only.  Per-run failures are recorded in
    the report, never raised.
    """
    columns = tuple(TOOL_NAME + suffix for suffix, _ in GRID_COLUMNS)
    cells = {
        TOOL_NAME + suffix: BenchCell(TOOL_NAME + suffix)
        for suffix, _ in GRID_COLUMNS
    }
    jobs = [
        (TOOL_NAME + suffix, flags, path)
        for suffix, flags in GRID_COLUMNS
        for path in inputs
    ]
    if concurrent_cells:
        with ThreadPoolExecutor() as pool:
            records = list(
                pool.map(
                    lambda job: (job[0], _bench_one(job[2], job[1], timeout, backend)),
                    jobs,
                )
            )
    else:
        records = [
            (label, _bench_one(path, flags, timeout, backend))
            for label, flags, path in jobs
        ]
    for label, record in records:
        cells[label].runs.append(record)
    return BenchReport(columns=columns, cells=cells)


def bundled_problem_paths(include_divergent: bool = False) -> list[Path]:
    """Paths of the classic systems shipped with the package."""
    base = resources.files("kbcomplete") / "problems"
    out = []
    for entry in sorted(base.iterdir(), key=lambda e: e.name):
        if not entry.name.endswith(".trs"):
            continue
        if not include_divergent and entry.name == "band.trs":
            continue
        out.append(Path(str(entry)))
    return out


def build_bench_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(
        prog=f"{TOOL_NAME}-bench",
        description="Run the eight-configuration benchmark grid over a set "
        "of problem files.",
    )
    parser.add_argument(
        "inputs",
        nargs="*",
        help="problem files (default: the bundled classic systems)",
    )
    parser.add_argument(
        "-s",
        "--timeout",
        type=_positive_int,
        default=60,
        metavar="SECONDS",
        help="per-run budget (default 60)",
    )
    parser.add_argument(
        "-m",
        "--method",
        default="lpo",
        metavar="METHOD",
        help="termination-check method for every run",
    )
    parser.add_argument(
        "-o",
        "--output",
        metavar="PREFIX",
        help="write PREFIX.txt and PREFIX.json instead of stdout only",
    )
    parser.add_argument(
        "--concurrent-cells",
        action="store_true",
        help="run grid cells concurrently (smoke testing only; timings "
        "will contend)",
    )
    return parser


def bench_main(argv: list[str] | None = None) -> int:
    args = build_bench_parser().parse_args(argv)
    if args.inputs:
        inputs = [Path(p) for p in args.inputs]
    else:
        inputs = bundled_problem_paths()
    report = bench_grid(
        inputs,
        timeout=float(args.timeout),
        backend=_backend_from_method(args.method),
        concurrent_cells=args.concurrent_cells,
    )
    text = report.render_text()
    sys.stdout.write(text)
    if args.output:
        Path(args.output + ".txt").write_text(text)
        Path(args.output + ".json").write_text(report.to_json())
    return EXIT_SUCCESS


if __name__ == "__main__":
    sys.exit(main())
