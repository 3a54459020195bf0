"""Command-line interface.

Three subcommands:

    cmot solve <problem-file>     run a solve, write outputs
    cmot validate <problem-file>  load and report step-size bounds
    cmot info <frames-file>       print a frame archive's header

Exit codes: 0 on success (for solve: convergence), 2 when the solve
used its full iteration budget without converging, 1 on any error,
including usage errors, which also print the synopsis.

Output files are deterministic: the same invocation on the same file
produces byte-identical frames, images, and history.
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import replace
from pathlib import Path

from .output import (
    FrameArchiveError,
    read_frames,
    write_frames,
    write_heatmaps,
    write_history,
)
from .problems import ProblemFileError, load_problem
from .solvers import NonFiniteFieldError, run, validate_steps

__all__ = ["main"]


class _UsageError(Exception):
    def __init__(self, message: str, parser: argparse.ArgumentParser):
        super().__init__(message)
        self.parser = parser


class _Parser(argparse.ArgumentParser):
    """argparse variant that reports usage errors instead of exiting."""

    def error(self, message):
        raise _UsageError(message, self)


def _build_parser() -> _Parser:
    parser = _Parser(prog="cmot", description="Constrained dynamic optimal transport solver.")
    sub = parser.add_subparsers(dest="command", metavar="command")

    solve = sub.add_parser("solve", help="run a transport solve and write its outputs")
    solve.add_argument("problem", help="problem definition file")
    solve.add_argument("--algorithm", choices=["alg1", "alg2", "alg3"], help="override the file's algorithm")
    solve.add_argument("--max-iters", type=int, help="override the outer iteration budget")
    solve.add_argument("--tol", type=float, help="override the density-change stopping tolerance")
    solve.add_argument("--out-dir", help="output directory (default: <problem stem>_out)")
    solve.add_argument("--snapshots", type=int, help="override the heatmap snapshot count")
    solve.add_argument("--quiet", action="store_true", help="suppress progress and summary text")

    validate = sub.add_parser("validate", help="check a problem file and its step sizes")
    validate.add_argument("problem", help="problem definition file")

    info = sub.add_parser("info", help="print a frame archive header")
    info.add_argument("frames", help="frame archive file")
    return parser


def _cmd_solve(ns) -> int:
    pf = load_problem(ns.problem)
    params = pf.params
    if ns.max_iters is not None:
        params = replace(params, max_outer=ns.max_iters)
    if ns.tol is not None:
        params = replace(params, tol_density=ns.tol)
    algorithm = ns.algorithm or pf.algorithm
    outputs = pf.outputs
    if ns.snapshots is not None:
        outputs = replace(outputs, images=ns.snapshots)

    report = validate_steps(params, algorithm)
    if not ns.quiet:
        for line in report.lines():
            print(line)
    if report.status == "Violated":
        print("warning: step sizes violate the convergence bounds", file=sys.stderr)

    started = time.perf_counter()
    solution = run(pf.problem, params, algorithm)
    elapsed = time.perf_counter() - started

    out_dir = Path(ns.out_dir) if ns.out_dir else Path(ns.problem).with_suffix("").parent / (
        Path(ns.problem).with_suffix("").name + "_out"
    )
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    if outputs.frames:
        target = out_dir / "frames.bin"
        write_frames(solution, target)
        written.append(target)
    if outputs.history:
        target = out_dir / "history.csv"
        write_history(solution.history, target)
        written.append(target)
    if outputs.images >= 2:
        written.extend(write_heatmaps(solution, out_dir, outputs.images))

    if not ns.quiet:
        verdict = "converged" if solution.converged else "stopped at the iteration budget"
        print(
            f"{algorithm} {verdict} after {solution.iterations} iterations "
            f"({elapsed:.2f} s)"
        )
        print(f"final energy {solution.final_energy!r}")
        for target in written:
            print(f"wrote {target}")
    return 0 if solution.converged else 2


def _cmd_validate(ns) -> int:
    pf = load_problem(ns.problem)
    report = validate_steps(pf.params, pf.algorithm)
    for line in report.lines():
        print(line)
    print(f"overall: {report.status}")
    return 0


def _cmd_info(ns) -> int:
    archive = read_frames(ns.frames)
    grid = archive.grid
    print(f"archive {ns.frames}")
    print(f"grid nt={grid.nt} nx={grid.nx} ny={grid.ny} bc={grid.space_bc.value}")
    print(f"spacing dt={grid.dt!r} dx={grid.dx!r} dy={grid.dy!r}")
    print(f"fields {', '.join(archive.fields)}")
    print(f"iterations {archive.iterations}")
    print(f"final energy {archive.final_energy!r}")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        ns = parser.parse_args(argv)
    except _UsageError as exc:
        print(exc.parser.format_usage(), end="", file=sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help paths
        return int(exc.code or 0)
    if ns.command is None:
        print(parser.format_usage(), end="", file=sys.stderr)
        print("error: a command is required", file=sys.stderr)
        return 1
    try:
        if ns.command == "solve":
            return _cmd_solve(ns)
        if ns.command == "validate":
            return _cmd_validate(ns)
        return _cmd_info(ns)
    except (ProblemFileError, FrameArchiveError, NonFiniteFieldError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
