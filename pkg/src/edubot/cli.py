"""simharness: load runs, scenario suites, goldens and figure reports.

Exit codes: 0 everything passed, 1 a check failed, 2 the invocation or
its input files were unusable.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .core import EduBotError, InvalidInput
from .gateway import ScenarioError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="simharness",
                                     description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    load = sub.add_parser("load", help="loopback load run with latency gates")
    load.add_argument("--instructors", type=int, default=12)
    load.add_argument("--students", type=int, default=50,
                      help="students per instructor")
    load.add_argument("--seed", type=int, default=7)
    load.add_argument("--threshold-ms", type=float, default=300.0)
    load.add_argument("--spacing-s", type=float, default=0.4,
                      help="pause between REST calls per instructor thread")
    load.add_argument("--report", type=Path, default=None,
                      help="write summary JSON here, plus .samples.csv and "
                           ".latency.png siblings")

    suite = sub.add_parser("suite", help="replay scenarios against goldens")
    suite.add_argument("directory", type=Path)

    golden = sub.add_parser("golden",
                            help="write golden files for the scenarios")
    golden.add_argument("directory", type=Path)

    report = sub.add_parser("report",
                            help="render figures for exported CSV data")
    report.add_argument("--data-dir", type=Path, required=True,
                        help="service data directory")
    report.add_argument("--out", type=Path, required=True,
                        help="directory for report.csv and the figures")
    return parser


def cmd_load(args) -> int:
    from .harness import LoadConfig, run_load

    if args.instructors < 1 or args.students < 1:
        raise InvalidInput("instructors and students must be at least 1")
    report = run_load(LoadConfig(
        instructors=args.instructors, students=args.students, seed=args.seed,
        threshold_ms=args.threshold_ms, spacing_s=args.spacing_s,
        report_path=args.report,
    ))
    print(f"requests: {report.requests}  errors: {report.errors}")
    print(f"latency ms: p50={report.latency_ms['p50']} "
          f"p95={report.latency_ms['p95']} p99={report.latency_ms['p99']} "
          f"max={report.latency_ms['max']}")
    print(f"threshold: p95 <= {report.threshold_ms} ms -> "
          f"{'PASS' if report.passed else 'FAIL'}")
    if args.report:
        print(f"report written to {args.report}")
    return 0 if report.passed else 1


def cmd_suite(args) -> int:
    from .harness import run_suite

    if not args.directory.is_dir():
        raise InvalidInput(f"{args.directory} is not a directory")
    result = run_suite(args.directory, log=print)
    print(f"{sum(o.passed for o in result.outcomes)}/{len(result.outcomes)} "
          "scenarios passed")
    return 0 if result.passed else 1


def cmd_golden(args) -> int:
    from .harness import write_goldens

    if not args.directory.is_dir():
        raise InvalidInput(f"{args.directory} is not a directory")
    for path in write_goldens(args.directory):
        print(f"wrote {path}")
    return 0


def cmd_report(args) -> int:
    from .reporting import render_report

    if not args.data_dir.is_dir():
        raise InvalidInput(f"{args.data_dir} is not a directory")
    report_path = render_report(args.data_dir, args.out)
    print(f"wrote {report_path}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {"load": cmd_load, "suite": cmd_suite,
                "golden": cmd_golden, "report": cmd_report}
    try:
        return handlers[args.command](args)
    except (ScenarioError, InvalidInput, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except EduBotError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
