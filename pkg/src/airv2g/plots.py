"""Static SVG figures: power breakdown, fleet SoC distribution, aircraft SoC staircase.

Output is byte-deterministic for fixed input: matplotlib's hash salt is
pinned and date metadata stripped.
"""

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "airv2g"
import matplotlib.pyplot as plt
import numpy as np


def _save(fig, path: Path):
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def emit_plots(report, out_dir) -> dict[str, dict]:
    """Render figures for a SolutionReport; returns the plotted series per figure."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    series: dict[str, dict] = {}
    caps = report.meta.get("grid_caps", {})
    dt = report.meta.get("dt_hours", 1.0)

    for h in report.airports:
        data = {
            "P_gr": np.asarray(report.grid_power[h]),
            "P_c": np.asarray(report.landside_power[h]),
            "P_a": np.asarray(report.apron_power[h]),
        }
        name = f"power_{h}"
        series[name] = data
        _power_breakdown_figure(data, caps.get(h), dt, h, out_dir / f"{name}.svg")

    for h, st in report.fleet.items():
        total = np.asarray(st.x_c) + np.asarray(st.x_i) + np.asarray(st.x_d)
        name = f"fleet_{h}"
        series[name] = {"total": total}
        fig, ax = plt.subplots(figsize=(8, 3))
        if total.size:
            ax.imshow(total, aspect="auto", origin="lower", interpolation="nearest")
        ax.set_xlabel("step")
        ax.set_ylabel("SoC bucket")
        ax.set_title(f"parked fleet distribution at {h}")
        _save(fig, out_dir / f"{name}.svg")

    batteries = {a: np.asarray(e) for a, e in report.battery_energy.items()}
    series["aircraft_soc"] = batteries
    fig, ax = plt.subplots(figsize=(8, 3))
    for a in sorted(batteries):
        ax.step(range(len(batteries[a])), batteries[a], where="post", label=f"aircraft {a}")
    if len(batteries) <= 8 and batteries:
        ax.legend(fontsize=6)
    ax.set_xlabel("step")
    ax.set_ylabel("battery energy [MWh]")
    _save(fig, out_dir / "aircraft_soc.svg")
    return series


def _power_breakdown_figure(data, cap, dt, airport, path):
    steps = len(data["P_gr"])
    t = np.arange(steps) * dt
    fig, ax = plt.subplots(figsize=(8, 3))
    if steps:
        ax.stackplot(
            t,
            np.maximum(data["P_a"], 0.0),
            np.maximum(data["P_c"], 0.0),
            labels=["apron", "landside"],
            alpha=0.6,
        )
        ax.plot(t, data["P_gr"], lw=1.2, label="grid draw")
        if cap is not None:
            ax.axhline(cap, ls="--", lw=0.8, label="grid cap")
        ax.legend(fontsize=6, ncol=4)
    ax.set_xlabel("hour")
    ax.set_ylabel("power [MW]")
    ax.set_title(f"power breakdown at {airport}")
    _save(fig, path)


def emit_plots_from_dir(run_dir) -> list[Path]:
    """Rebuild figures from a run directory's CSV files."""
    run_dir = Path(run_dir)
    written = []
    caps = {}
    for power_csv in sorted(run_dir.glob("power_*.csv")):
        h = power_csv.stem[len("power_") :]
        data = {"P_gr": [], "P_c": [], "P_a": []}
        with open(power_csv, encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                for key in data:
                    data[key].append(float(row[key]))
        data = {k: np.asarray(v) for k, v in data.items()}
        path = run_dir / f"power_{h}.svg"
        _power_breakdown_figure(data, caps.get(h), 1.0, h, path)
        written.append(path)

    for fleet_csv in sorted(run_dir.glob("fleet_*.csv")):
        h = fleet_csv.stem[len("fleet_") :]
        cells: dict[tuple[int, int], float] = {}
        B = K = 0
        with open(fleet_csv, encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                b, k = int(row["bucket"]) - 1, int(row["step"])
                cells[(b, k)] = float(row["x_c"]) + float(row["x_i"]) + float(row["x_d"])
                B, K = max(B, b + 1), max(K, k + 1)
        total = np.zeros((B, K))
        for (b, k), v in cells.items():
            total[b, k] = v
        fig, ax = plt.subplots(figsize=(8, 3))
        ax.imshow(total, aspect="auto", origin="lower", interpolation="nearest")
        ax.set_xlabel("step")
        ax.set_ylabel("SoC bucket")
        ax.set_title(f"parked fleet distribution at {h}")
        path = run_dir / f"fleet_{h}.svg"
        _save(fig, path)
        written.append(path)

    batteries = {}
    for ac_csv in sorted(run_dir.glob("aircraft_*.csv")):
        a = ac_csv.stem[len("aircraft_") :]
        eb = []
        with open(ac_csv, encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                eb.append(float(row["E_b"]))
        batteries[a] = np.asarray(eb)
    fig, ax = plt.subplots(figsize=(8, 3))
    for a in sorted(batteries):
        ax.step(range(len(batteries[a])), batteries[a], where="post")
    ax.set_xlabel("step")
    ax.set_ylabel("battery energy [MWh]")
    path = run_dir / "aircraft_soc.svg"
    _save(fig, path)
    written.append(path)
    return written
