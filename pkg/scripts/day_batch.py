#!/usr/bin/env python3
"""Batch runner: baseline vs V2G for several day scenarios, averaged savings.

Usage: python scripts/day_batch.py [scenario_day1.toml scenario_day2.toml ...]
Defaults to the three shipped hub days.
"""

import argparse
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from airv2g import cli, solver  # noqa: E402


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    default_days = [str(ROOT / "data" / "hub" / f"scenario_day{i}.toml") for i in (1, 2, 3)]
    parser.add_argument("scenarios", nargs="*", default=default_days)
    parser.add_argument("--chargers", type=int, default=None, help="override the V2G charger count")
    args = parser.parse_args(argv)

    savings = []
    for path in args.scenarios:
        scenario = cli.load_scenario(path)
        v2g = scenario if args.chargers is None else scenario.with_overrides(chargers=args.chargers)
        base = scenario.with_overrides(chargers=0)
        r_v2g = cli.run_scenario(v2g)
        r_base = cli.run_scenario(base)
        if solver.OPTIMAL not in (r_v2g.outcome.status, r_base.outcome.status):
            print(f"{scenario.name}: base {r_base.outcome.status}, v2g {r_v2g.outcome.status}")
            continue
        s = 1.0 - r_v2g.outcome.objective / r_base.outcome.objective
        savings.append(s)
        print(
            f"{scenario.name}: baseline {r_base.outcome.objective:12.2f}  "
            f"v2g {r_v2g.outcome.objective:12.2f}  savings {100 * s:6.2f} %"
        )
    if savings:
        print(f"average savings over {len(savings)} day(s): {100 * sum(savings) / len(savings):.2f} %")


if __name__ == "__main__":
    main()
