"""Command line entry point.

Exit codes: 0 success, 1 solver failure (records are still written),
2 usage or parse error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .runner import PLOT_KINDS, PlotError, emit_plotdata, run_scenario, run_suite, summarize, write_tables
from .scenario import ScenarioError, load_scenario

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default="runs", help="output directory (default: runs)")
    common.add_argument("--seed", type=int, default=None, help="override the scenario seed")

    ap = argparse.ArgumentParser(prog="alspg", description="Run ALSPG benchmark scenarios.")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", parents=[common], help="run one scenario file")
    p.add_argument("file")
    p = sub.add_parser("suite", parents=[common], help="run every *.scenario under a directory")
    p.add_argument("dir")
    p.add_argument("--filter", default=None, help="regex on the path relative to DIR")
    p.add_argument("--jobs", type=int, default=1)
    p = sub.add_parser("plot", parents=[common], help="write plot data for a record")
    p.add_argument("record")
    p.add_argument("--kind", choices=PLOT_KINDS, required=True)
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "run":
            sc = load_scenario(args.file)
            records = run_scenario(sc, args.out, args.seed)
            rows = summarize(records)
        elif args.command == "suite":
            if args.jobs < 1:
                raise ScenarioError("--jobs must be >= 1")
            records, rows = run_suite(args.dir, args.filter, args.jobs, args.out, args.seed)
        else:
            path = emit_plotdata(args.record, args.kind, args.out)
            print(path)
            return EXIT_OK
    except ScenarioError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except PlotError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAIL

    write_tables(records, rows, args.out)
    print((Path(args.out) / "summary.txt").read_text(), end="")
    failed = [r for r in records if not r.converged]
    for r in failed:
        print(f"{r.scenario_id}: {r.status}", file=sys.stderr)
    return EXIT_FAIL if failed else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
