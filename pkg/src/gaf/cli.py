"""Command-line entry point: ``gaf <subcommand> --config F [--out R] [--fields-dir D] [--jobs N]``."""

from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ThreadPoolExecutor

from .errors import ConfigError, GafError, IoError
from .harness import CONFIG_KEYS, PIPELINES, Report, export_fields, export_report, load_scenario

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gaf",
        description="Run verification pipelines for the conjugate generalized-analytic pair.",
        epilog=CONFIG_KEYS,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("subcommand", choices=sorted(PIPELINES))
    parser.add_argument("--config", action="append", required=True, metavar="FILE",
                        help="scenario TOML file; repeat to run several scenarios")
    parser.add_argument("--out", metavar="REPORT", help="write the JSON report here")
    parser.add_argument("--fields-dir", metavar="DIR", help="export produced fields (CSV and binary)")
    parser.add_argument("--jobs", type=int, default=1, metavar="N", help="scenarios run concurrently")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def _run_one(subcommand: str, path: str, fields_dir) -> Report:
    scenario = load_scenario(path)
    try:
        report = PIPELINES[subcommand](scenario)
    except ConfigError:
        raise
    except GafError as exc:
        report = Report(scenario.name, input_digest=scenario.digest,
                        error=f"{subcommand} failed for scenario {scenario.name!r}: "
                              f"{type(exc).__name__}: {exc}")
    if fields_dir is not None and report.error is None:
        export_fields(report, fields_dir)
    return report


def _summary(report: Report) -> str:
    lines = [f"[{'PASS' if report.passed else 'FAIL'}] {report.scenario}"]
    if report.error:
        lines.append(f"  error: {report.error}")
    for c in report.checks:
        lines.append(f"  {'ok  ' if c.passed else 'FAIL'} {c.name:<40s} {c.value:.3e} <= {c.threshold:.1e}")
    return "\n".join(lines)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    if args.subcommand == "export" and args.fields_dir is None:
        print("gaf export: --fields-dir is required", file=sys.stderr)
        return EXIT_USAGE
    try:
        with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
            reports = list(pool.map(lambda p: _run_one(args.subcommand, p, args.fields_dir), args.config))
        for r in reports:
            print(_summary(r))
        if args.out:
            export_report(reports[0] if len(reports) == 1 else reports, args.out)
    except (ConfigError, IoError) as exc:
        print(f"gaf: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_PASS if all(r.passed for r in reports) else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
