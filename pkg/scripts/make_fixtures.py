#!/usr/bin/env python3
"""Generate the synthetic scenario fixtures shipped under data/.

Everything is seeded and deterministic: rerunning this script reproduces the
committed files byte for byte.  The hub fixture mimics a single-hub shuttle
network (45 airports, ~350 daily flights within 800 km, V2G chargers at the
hub only); the toy fixture is small enough for the dense reference solver.
"""

import math
import sys
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from airv2g.schedule import EARTH_RADIUS_KM  # noqa: E402

HUB_LAT, HUB_LON = 52.308, 4.764


def offset_coord(lat, lon, distance_km, bearing_deg):
    """Destination point along a great circle (spherical earth)."""
    d = distance_km / EARTH_RADIUS_KM
    br = math.radians(bearing_deg)
    p1, l1 = math.radians(lat), math.radians(lon)
    p2 = math.asin(math.sin(p1) * math.cos(d) + math.cos(p1) * math.sin(d) * math.cos(br))
    l2 = l1 + math.atan2(
        math.sin(br) * math.sin(d) * math.cos(p1),
        math.cos(d) - math.sin(p1) * math.sin(p2),
    )
    return math.degrees(p2), math.degrees(l2)


def hhmm(minutes: int) -> str:
    minutes = int(minutes) % (24 * 60)
    return f"{minutes // 60:02d}{minutes % 60:02d}"


ZONES = ["NL", "DE", "FR", "BE", "GB", "DK", "CH", "AT", "NO", "SE", "PL", "CZ"]


def make_hub(data_dir: Path):
    rng = np.random.default_rng(20250122)
    out = data_dir / "hub"
    out.mkdir(parents=True, exist_ok=True)

    # 44 spokes on rings between 180 and 760 km from the hub
    spokes = []
    for i in range(44):
        dist = 180.0 + 580.0 * (i % 11) / 10.0 + float(rng.uniform(-25, 25))
        bearing = float(360.0 * i / 44.0 + rng.uniform(-4, 4))
        lat, lon = offset_coord(HUB_LAT, HUB_LON, dist, bearing)
        zone = ZONES[1 + (i % (len(ZONES) - 1))]
        spokes.append((f"AP{i + 1:02d}", lat, lon, zone, dist))

    with open(out / "airports.csv", "w", encoding="utf-8") as fh:
        fh.write("# synthetic single-hub network: V2G chargers at the hub only\n")
        fh.write("code,lat,lon,grid_cap_mw,price_zone,chargers,charger_kw,ev_kwh\n")
        fh.write(f"HUB,{HUB_LAT},{HUB_LON},80,NL,6000,22,60\n")
        for code, lat, lon, zone, _ in spokes:
            fh.write(f"{code},{lat:.4f},{lon:.4f},80,{zone},0,22,60\n")

    # shuttle round trips; closer spokes fly more rotations
    rows = []
    fid = 100
    for code, lat, lon, zone, dist in spokes:
        block = dist / 460.0 + 0.55  # block hours per leg
        n_rt = 5 if dist < 320 else 4 if dist < 560 else 3
        first = float(rng.uniform(5.0, 6.5))
        spacing = (21.5 - first - 2 * block) / max(n_rt - 1, 1)
        for r in range(n_rt):
            dep_out = first + r * spacing + float(rng.uniform(-0.15, 0.15))
            arr_out = dep_out + block
            dep_back = arr_out + 0.75 + float(rng.uniform(0.0, 0.25))
            arr_back = dep_back + block
            if arr_back >= 23.9:
                continue
            rows.append((fid, "HUB", code, dep_out, arr_out))
            rows.append((fid + 1, code, "HUB", dep_back, arr_back))
            fid += 2

    with open(out / "flights.csv", "w", encoding="utf-8") as fh:
        fh.write("id,origin,destination,dep_hhmm,arr_hhmm\n")
        for fid, o, d, dep, arr in rows:
            fh.write(f"{fid},{o},{d},{hhmm(round(dep * 60))},{hhmm(round(arr * 60))}\n")
    print(f"hub flights: {len(rows)}")

    # three price days: pronounced day/night spread, zone offsets, seeded noise
    base_shape = np.array(
        [28, 26, 24, 23, 23, 26, 45, 80, 110, 120, 115, 105, 95, 92, 96, 105, 118, 132, 138, 125, 95, 60, 40, 32],
        dtype=float,
    )
    for day, (amp, wobble_seed) in enumerate([(1.0, 1), (1.15, 2), (0.9, 3)], start=1):
        wrng = np.random.default_rng(wobble_seed)
        with open(out / f"prices_day{day}.csv", "w", encoding="utf-8") as fh:
            fh.write("zone,hour_utc,price_eur_mwh\n")
            for zi, zone in enumerate(ZONES):
                offset = (zi - 3) * 4.0
                wobble = wrng.normal(0.0, 3.0, size=24)
                for h in range(24):
                    price = amp * base_shape[h] + offset + wobble[h]
                    fh.write(f"{zone},{h},{price:.2f}\n")

    arrivals = [0] * 24
    departures = [0] * 24
    for h, v in zip(range(5, 11), [250, 420, 420, 380, 300, 150]):
        arrivals[h] = v
    for h, v in zip(range(15, 23), [180, 260, 320, 340, 300, 260, 180, 80]):
        departures[h] = v
    assert sum(arrivals) == sum(departures), (sum(arrivals), sum(departures))

    occ_lines = [
        "[occupancy]",
        "soc_buckets = 10",
        "charge_efficiency = 0.95",
        "auto_coarsen = true",
        "",
        "[occupancy.HUB]",
        "seed = 7",
        "initial_count = 2500",
        f"arrivals_per_hour = {list(arrivals)}",
        f"departures_per_hour = {list(departures)}",
    ]
    for day in (1, 2, 3):
        cfg = "\n".join(
            [
                f'name = "hub_day{day}"',
                "",
                "[horizon]",
                "steps = 96",
                "dt_hours = 0.25",
                "",
                "[aircraft]",
                "mass_kg = 78000.0",
                "lift_to_drag = 23.0",
                "battery_capacity_mwh = 12.0",
                "reserve_mwh = 1.2",
                "max_charge_power_mw = 12.0",
                "powertrain_efficiency = 0.9",
                "max_range_km = 800.0",
                "",
                "[airports]",
                'file = "airports.csv"',
                "",
                "[flights]",
                'file = "flights.csv"',
                "",
                "[prices]",
                f'file = "prices_day{day}.csv"',
                "",
                "[policy]",
                "allow_grid_export = false",
                "wrap = false",
                "turnaround_steps = 3",
                "",
            ]
            + occ_lines
        )
        (out / f"scenario_day{day}.toml").write_text(cfg + "\n", encoding="utf-8")


def make_toy(data_dir: Path):
    out = data_dir / "toy"
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "airports.csv", "w", encoding="utf-8") as fh:
        fh.write("code,lat,lon,grid_cap_mw,price_zone,chargers,charger_kw,ev_kwh\n")
        fh.write("AAA,52.308,4.764,8,Z1,10,11,60\n")
        fh.write("BBB,48.85,2.35,8,Z2,0,11,60\n")
    with open(out / "flights.csv", "w", encoding="utf-8") as fh:
        fh.write("id,origin,destination,dep_hhmm,arr_hhmm\n")
        fh.write("1,AAA,BBB,0600,0800\n")
        fh.write("2,BBB,AAA,1400,1600\n")
    night = [30.0] * 7
    day = [120.0] * 13
    late = [25.0] * 4
    with open(out / "prices.csv", "w", encoding="utf-8") as fh:
        fh.write("zone,hour_utc,price_eur_mwh\n")
        for h, p in enumerate(night + day + late):
            fh.write(f"Z1,{h},{p}\n")
        for h, p in enumerate(night + day + late):
            fh.write(f"Z2,{h},{p + 15.0}\n")
    cfg = "\n".join(
        [
            'name = "toy"',
            "",
            "[horizon]",
            "steps = 24",
            "dt_hours = 1.0",
            "",
            "[aircraft]",
            "mass_kg = 78000.0",
            "lift_to_drag = 23.0",
            "battery_capacity_mwh = 12.0",
            "reserve_mwh = 1.2",
            "max_charge_power_mw = 12.0",
            "powertrain_efficiency = 0.9",
            "max_range_km = 800.0",
            "",
            "[airports]",
            'file = "airports.csv"',
            "",
            "[flights]",
            'file = "flights.csv"',
            "",
            "[prices]",
            'file = "prices.csv"',
            "",
            "[policy]",
            "allow_grid_export = false",
            "wrap = false",
            "turnaround_steps = 3",
            "",
            "[occupancy]",
            "soc_buckets = 4",
            "charge_efficiency = 0.95",
            "auto_coarsen = true",
            "",
            "[occupancy.AAA]",
            "seed = 42",
            "initial_count = 5",
            "arrivals_per_hour = [0, 0, 0, 0, 0, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]",
            "departures_per_hour = [0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 0, 0, 0]",
        ]
    )
    (out / "scenario.toml").write_text(cfg + "\n", encoding="utf-8")


if __name__ == "__main__":
    data = ROOT / "data"
    make_toy(data)
    make_hub(data)
    print(f"fixtures written under {data}")
