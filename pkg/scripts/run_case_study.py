"""Simulate the 98-charger fleet and write its yearly, monthly and daily reports.

    python3 scripts/run_case_study.py [--scenario scenarios/case_study.yaml] [--out work/case_study]

Prints the yearly site table when done.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from chargerel.experiment import run_case_study

ROOT = Path(__file__).resolve().parents[1]


def main() -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--scenario", default=str(ROOT / "scenarios" / "case_study.yaml"))
    p.add_argument("--out", default=str(ROOT / "work" / "case_study"))
    p.add_argument("--timezone", default="America/Los_Angeles")
    args = p.parse_args()

    run = run_case_study(args.scenario, args.out, site_timezone=args.timezone)
    failed = [c for c in run.exit_codes if c != 0]
    print(f"\n{len(run.reports)} reports in {run.workdir / 'reports'} ({run.seconds:.1f} s)")
    print(run.reports["yearly_site.csv"].read_text())
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
