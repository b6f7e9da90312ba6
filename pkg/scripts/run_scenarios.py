"""Run every pipeline that applies to each scenario in scenarios/ and print a summary.

    python scripts/run_scenarios.py [--dir scenarios] [--out reports.json]
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from gaf.harness import PIPELINES, export_report, load_scenario

MAP_PIPELINES = ("pullback", "compose-check")


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--dir", default=str(Path(__file__).resolve().parent.parent / "scenarios"))
    p.add_argument("--out", help="write all reports to one JSON file")
    args = p.parse_args(argv)
    reports = []
    for path in sorted(Path(args.dir).glob("*.toml")):
        scenario = load_scenario(path)
        names = ["verify"] + ([*MAP_PIPELINES] if scenario.map is not None else [])
        for name in names:
            rep = PIPELINES[name](scenario)
            reports.append(rep)
            worst = max(rep.checks, key=lambda c: c.value / c.threshold if c.threshold else c.value)
            print(f"{'PASS' if rep.passed else 'FAIL'}  {scenario.name:<26s} {name:<14s} "
                  f"{len(rep.checks):3d} checks  {rep.timing['seconds']:6.2f}s  "
                  f"tightest: {worst.name} = {worst.value:.2e} (<= {worst.threshold:.0e})")
    if args.out:
        export_report(reports, args.out)
    return 0 if all(r.passed for r in reports) else 1


if __name__ == "__main__":
    sys.exit(main())
