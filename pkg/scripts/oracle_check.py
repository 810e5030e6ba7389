"""Compare the pipeline with the per-second oracle on random fleets.

    python3 scripts/oracle_check.py [--seeds 1-50] [--granularity monthly] [--timezone UTC]

Exit status is 1 if any fleet disagrees.
"""
from __future__ import annotations

import argparse
import sys
import tempfile
import time

from chargerel.experiment import random_oracle_scenario, run_end_to_end


def seed_range(text: str) -> range:
    lo, _, hi = text.partition("-")
    return range(int(lo), int(hi or lo) + 1)


def main() -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seeds", type=seed_range, default=seed_range("1-50"))
    p.add_argument("--granularity", default="monthly",
                   choices=("daily", "weekly", "monthly", "yearly"))
    p.add_argument("--timezone", default="UTC")
    p.add_argument("--max-chargers", type=int, default=98)
    p.add_argument("--max-days", type=int, default=365)
    args = p.parse_args()

    bad = 0
    t_all = time.perf_counter()
    with tempfile.TemporaryDirectory() as tmp:
        for seed in args.seeds:
            scenario = random_oracle_scenario(seed, args.max_chargers, args.max_days)
            t0 = time.perf_counter()
            run = run_end_to_end(scenario, f"{tmp}/{seed}", args.granularity, args.timezone)
            days = (scenario.end - scenario.start) // 86400
            status = "ok" if run.ok else f"{len(run.mismatches)} mismatches"
            print(f"seed {seed:3d}: {scenario.charger_count:3d} chargers x {days:3d} days, "
                  f"{len(run.engine_rows):5d} rows, {time.perf_counter() - t0:5.1f} s, {status}")
            for line in run.mismatches[:5]:
                print("    " + line)
            bad += not run.ok
    print(f"{len(args.seeds) - bad}/{len(args.seeds)} fleets match "
          f"({time.perf_counter() - t_all:.1f} s)")
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main())
