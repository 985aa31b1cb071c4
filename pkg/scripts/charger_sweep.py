#!/usr/bin/env python3
"""Sweep the V2G charger count at the hub and tabulate cost savings.

Usage: python scripts/charger_sweep.py [scenario.toml] [--counts 0,300,1000,3000,6000]
"""

import argparse
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from airv2g import cli, solver  # noqa: E402


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("scenario", nargs="?", default=str(ROOT / "data" / "hub" / "scenario_day1.toml"))
    parser.add_argument("--counts", default="0,300,1000,2000,3000,6000")
    parser.add_argument("--out", default=None, help="optional CSV path for the table")
    args = parser.parse_args(argv)

    scenario = cli.load_scenario(args.scenario)
    counts = [int(c) for c in args.counts.split(",")]
    rows = []
    baseline_cost = None
    for n in counts:
        result = cli.run_scenario(scenario.with_overrides(chargers=n))
        if result.outcome.status != solver.OPTIMAL:
            print(f"chargers {n}: {result.outcome.status}")
            continue
        cost = result.outcome.objective
        if baseline_cost is None:
            baseline_cost = cost
        savings = 1.0 - cost / baseline_cost
        peak = max(result.report.peak_grid(h) for h in result.report.airports)
        rows.append((n, cost, savings, peak))
        print(f"chargers {n:>6}: cost {cost:12.2f}  savings {100 * savings:6.2f} %  peak grid {peak:6.2f} MW")

    if args.out and rows:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write("chargers,cost,savings,peak_grid_mw\n")
            for n, cost, savings, peak in rows:
                fh.write(f"{n},{cost:.6f},{savings:.6f},{peak:.6f}\n")
        print(f"table written to {args.out}")


if __name__ == "__main__":
    main()
