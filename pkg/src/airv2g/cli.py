"""Scenario runner and reporting front end.

Loads a scenario config (TOML sections: [horizon], [aircraft], [airports],
[flights], [prices], [occupancy], [policy]), runs baseline and variant
solves, and writes deterministic CSV reports plus comparison tables.
"""

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import lpcore, schedule, solver
from .evfleet import OccupancyProfile, write_stream_csv
from .lpcore import PriceSeries, SolutionReport
from .scenario import Scenario, fingerprint_scenario
from .schedule import AircraftParams, Horizon


class PriceError(ValueError):
    """Price file does not cover the horizon."""


class CompareError(ValueError):
    """Reports come from different scenarios."""


def parse_prices(text: str, horizon: Horizon) -> PriceSeries:
    """Parse `zone,hour_utc,price_eur_mwh` rows into a per-step series.

    Hourly values are held piecewise-constant across the sub-steps.  Every
    zone present must cover every hour of the day; all gaps are reported in
    one error.
    """
    hours_needed = horizon.day_hours
    by_zone: dict[str, dict[int, float]] = {}
    header_seen = False
    for line_no, row in schedule._data_rows(text):
        if not header_seen:
            if [c.strip() for c in row] != ["zone", "hour_utc", "price_eur_mwh"]:
                raise PriceError(f"line {line_no}: bad price header {row}")
            header_seen = True
            continue
        if len(row) != 3:
            raise PriceError(f"line {line_no}: expected 3 fields")
        zone = row[0].strip()
        try:
            hour = int(row[1])
            price = float(row[2])
        except ValueError as exc:
            raise PriceError(f"line {line_no}: {exc}") from exc
        if not math.isfinite(price):
            raise PriceError(f"line {line_no}: price must be finite")
        by_zone.setdefault(zone, {})[hour] = price

    gaps = []
    for zone in sorted(by_zone):
        missing = [h for h in range(hours_needed) if h not in by_zone[zone]]
        if missing:
            gaps.append(f"zone {zone} missing hours {missing}")
    if gaps:
        raise PriceError("; ".join(gaps))

    zones = {}
    for zone, hourly in by_zone.items():
        zones[zone] = np.array(
            [hourly[horizon.hour_of_step(k)] for k in range(horizon.steps)]
        )
    return PriceSeries(zones, horizon.steps)


def load_scenario(path) -> Scenario:
    """Load a scenario config and its referenced CSV files."""
    path = Path(path)
    with open(path, "rb") as fh:
        cfg = tomllib.load(fh)
    base = path.parent

    hz = cfg.get("horizon", {})
    horizon = Horizon(steps=int(hz.get("steps", 96)), dt_hours=float(hz.get("dt_hours", 0.25)))

    ac = cfg.get("aircraft", {})
    params = AircraftParams(
        mass=float(ac.get("mass_kg", 78_000.0)),
        lift_to_drag=float(ac.get("lift_to_drag", 23.0)),
        battery_capacity=float(ac.get("battery_capacity_mwh", 12.0)),
        reserve=float(ac.get("reserve_mwh", 1.2)),
        max_charge_power=float(ac.get("max_charge_power_mw", 12.0)),
        powertrain_efficiency=float(ac.get("powertrain_efficiency", 0.90)),
        max_range_km=float(ac.get("max_range_km", 800.0)),
    )

    pol = cfg.get("policy", {})
    occ_cfg = dict(cfg.get("occupancy", {}))
    soc_buckets = int(occ_cfg.pop("soc_buckets", 10))
    charge_efficiency = float(occ_cfg.pop("charge_efficiency", 0.95))
    auto_coarsen = bool(occ_cfg.pop("auto_coarsen", True))

    airports_text = (base / cfg["airports"]["file"]).read_text(encoding="utf-8")
    flights_text = (base / cfg["flights"]["file"]).read_text(encoding="utf-8")
    prices_text = (base / cfg["prices"]["file"]).read_text(encoding="utf-8")

    airports = schedule.parse_airport_table(airports_text)
    wrap = bool(pol.get("wrap", False))
    flights = schedule.parse_flight_table(flights_text, horizon, airports, params, wrap=wrap)
    prices = parse_prices(prices_text, horizon)

    occupancy = {}
    for code, prof in occ_cfg.items():
        if not isinstance(prof, dict):
            raise ValueError(f"[occupancy.{code}] must be a table of profile settings")
        if code not in airports:
            raise ValueError(f"occupancy profile for unknown airport {code!r}")
        occupancy[code] = OccupancyProfile(
            arrivals_per_hour=tuple(int(v) for v in prof["arrivals_per_hour"]),
            departures_per_hour=tuple(int(v) for v in prof["departures_per_hour"]),
            initial_count=int(prof.get("initial_count", 0)),
            seed=int(prof.get("seed", 0)),
            arrival_soc_max=float(prof.get("arrival_soc_max", 0.5)),
            depart_soc_min=float(prof.get("depart_soc_min", 0.67)),
            min_dwell_hours=(
                float(prof["min_dwell_hours"]) if "min_dwell_hours" in prof else None
            ),
        )

    return Scenario(
        horizon=horizon,
        airports=airports,
        flights=flights,
        params=params,
        prices=prices,
        occupancy=occupancy,
        soc_buckets=soc_buckets,
        charge_efficiency=charge_efficiency,
        auto_coarsen=auto_coarsen,
        allow_grid_export=bool(pol.get("allow_grid_export", False)),
        wrap=wrap,
        turnaround_steps=int(pol.get("turnaround_steps", 3)),
        name=str(cfg.get("name", path.stem)),
        fingerprint=fingerprint_scenario(cfg, airports_text, flights_text, prices_text),
    )


@dataclass
class RunResult:
    outcome: solver.SolveOutcome
    report: SolutionReport | None
    verification: solver.VerificationReport | None
    diagnosis: dict | None = None
    out_dir: Path | None = None

    @property
    def ok(self) -> bool:
        return self.outcome.status == solver.OPTIMAL and (
            self.verification is None or self.verification.passed
        )


def run_scenario(
    scenario: Scenario,
    out_dir=None,
    solver_config: solver.SolverConfig | None = None,
    export_mps: bool = False,
) -> RunResult:
    """Build, solve, verify, extract, and (optionally) write report files.

    On infeasibility the grid caps are relaxed elastically and the minimum
    per-airport cap increase is reported as the diagnosis.
    """
    solver_config = solver_config or solver.SolverConfig()
    model = lpcore.build_problem(scenario)
    outcome = solver.solve(model, solver_config)

    if outcome.status == solver.INFEASIBLE:
        diagnosis = _diagnose_infeasible(model, solver_config)
        return RunResult(outcome=outcome, report=None, verification=None, diagnosis=diagnosis)
    if outcome.status != solver.OPTIMAL:
        return RunResult(outcome=outcome, report=None, verification=None)

    verification = solver.verify(model, outcome, solver_config)
    report = lpcore.extract_solution(model, outcome.primal, outcome.objective)
    report.meta["scenario_name"] = scenario.name
    report.meta["fingerprint"] = scenario.fingerprint
    report.meta["overrides"] = scenario.describe_overrides()
    report.meta["grid_caps"] = {h: ap.grid_cap for h, ap in scenario.airports.items()}

    result = RunResult(outcome=outcome, report=report, verification=verification)
    if out_dir is not None:
        result.out_dir = Path(out_dir)
        write_outputs(result, model, scenario, result.out_dir, export_mps=export_mps)
    return result


def _diagnose_infeasible(model, solver_config) -> dict:
    slack = solver.infeasibility_certificate(model, solver_config)
    diagnosis: dict = {"min_total_row_slack": slack}
    if slack <= solver_config.feasibility_tol:
        diagnosis["note"] = "relaxation closes the gap: likely a numerical artifact, not real infeasibility"
        return diagnosis
    relaxed, sigma = lpcore.relax_grid_caps(model)
    out = solver.solve(relaxed, solver.SolverConfig(backend=solver_config.backend))
    if out.status == solver.OPTIMAL:
        increases = {
            h: float(out.primal[j]) for h, j in sigma.items() if out.primal[j] > 1e-6
        }
        diagnosis["grid_cap_increase_mw"] = increases
        diagnosis["note"] = (
            "feasible with grid-cap increases: "
            + ", ".join(f"{h} +{v:.3f} MW" for h, v in sorted(increases.items()))
            if increases
            else "grid caps are not the binding cause"
        )
    else:
        diagnosis["note"] = f"even elastic grid caps stay {out.status}"
    return diagnosis


def _fmt(v: float) -> str:
    return f"{v:.10g}"


def write_outputs(result: RunResult, model, scenario: Scenario, out_dir: Path, export_mps=False):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report = result.report
    N = scenario.horizon.steps

    with open(out_dir / "summary.csv", "w", encoding="utf-8") as fh:
        fh.write("metric,key,value\n")
        fh.write(f"scenario,,{report.meta['scenario_name']}\n")
        fh.write(f"fingerprint,,{report.meta['fingerprint']}\n")
        fh.write(f"status,,{result.outcome.status}\n")
        fh.write(f"objective_cost,,{_fmt(report.objective_cost)}\n")
        for h in report.airports:
            fh.write(f"peak_grid_mw,{h},{_fmt(report.peak_grid(h))}\n")
            fh.write(f"grid_energy_mwh,{h},{_fmt(report.grid_energy(h))}\n")
            fh.write(f"apron_energy_mwh,{h},{_fmt(report.apron_energy(h))}\n")
            fh.write(
                f"landside_energy_mwh,{h},"
                f"{_fmt(float(report.landside_power[h].sum()) * scenario.horizon.dt_hours)}\n"
            )

    for h in report.airports:
        with open(out_dir / f"power_{h}.csv", "w", encoding="utf-8") as fh:
            fh.write("step,P_gr,P_c,P_a\n")
            for k in range(N):
                fh.write(
                    f"{k},{_fmt(report.grid_power[h][k])},"
                    f"{_fmt(report.landside_power[h][k])},{_fmt(report.apron_power[h][k])}\n"
                )

    ground = report.meta["ground"]
    aircraft_ids = list(report.battery_energy)
    for p_idx, a in enumerate(aircraft_ids):
        with open(out_dir / f"aircraft_{a}.csv", "w", encoding="utf-8") as fh:
            fh.write("step,E_b,P_b,airport\n")
            for k in range(N):
                at = ground.airport_at(p_idx, k) or ""
                fh.write(
                    f"{k},{_fmt(report.battery_energy[a][k])},"
                    f"{_fmt(report.charge_power[a][k])},{at}\n"
                )
            fh.write(f"{N},{_fmt(report.battery_energy[a][N])},,\n")

    for h, st in report.fleet.items():
        with open(out_dir / f"fleet_{h}.csv", "w", encoding="utf-8") as fh:
            fh.write("step,bucket,x_c,x_i,x_d\n")
            for k in range(N + 1):
                for b in range(st.x_c.shape[0]):
                    fh.write(
                        f"{k},{b + 1},{_fmt(st.x_c[b, k])},"
                        f"{_fmt(st.x_i[b, k])},{_fmt(st.x_d[b, k])}\n"
                    )
        write_stream_csv(report.meta["streams"][h], out_dir / f"occupancy_{h}.csv")

    solver.write_solution_csv(model, result.outcome, out_dir / "solution.csv")
    if export_mps:
        (out_dir / "model.mps").write_text(lpcore.write_mps(model), encoding="utf-8")

    payload = {
        "scenario": report.meta["scenario_name"],
        "fingerprint": report.meta["fingerprint"],
        "status": result.outcome.status,
        "objective_cost": report.objective_cost,
        "recomputed_cost": report.recomputed_cost,
        "iterations": result.outcome.iterations,
        "wall_time_s": result.outcome.wall_time,
        "residuals": report.residual_summary,
        "charge_slack": {str(k): v for k, v in report.charge_slack.items()},
        "verification": [
            {"check": name, "passed": ok, "detail": detail}
            for name, ok, detail in (result.verification.checks if result.verification else [])
        ],
        "overrides": report.meta.get("overrides", {}),
    }
    (out_dir / "report.json").write_text(json.dumps(payload, indent=2, sort_keys=True), encoding="utf-8")


@dataclass
class RunSummary:
    """The comparable essentials of one run (parsed back from summary.csv)."""

    name: str
    fingerprint: str
    status: str
    objective_cost: float
    peak_grid: dict[str, float] = field(default_factory=dict)
    grid_energy: dict[str, float] = field(default_factory=dict)
    apron_energy: dict[str, float] = field(default_factory=dict)
    landside_energy: dict[str, float] = field(default_factory=dict)


def summarize(report: SolutionReport, name: str | None = None) -> RunSummary:
    dt = report.meta.get("dt_hours", 1.0)
    return RunSummary(
        name=name or report.meta.get("scenario_name", "run"),
        fingerprint=report.meta.get("fingerprint", ""),
        status="optimal",
        objective_cost=report.objective_cost,
        peak_grid={h: report.peak_grid(h) for h in report.airports},
        grid_energy={h: report.grid_energy(h) for h in report.airports},
        apron_energy={h: report.apron_energy(h) for h in report.airports},
        landside_energy={
            h: float(report.landside_power[h].sum()) * dt for h in report.airports
        },
    )


def read_summary(path) -> RunSummary:
    path = Path(path)
    if path.is_dir():
        path = path / "summary.csv"
    summary = RunSummary(name=path.parent.name, fingerprint="", status="", objective_cost=float("nan"))
    with open(path, encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            metric, key, value = row["metric"], row["key"], row["value"]
            if metric == "scenario":
                summary.name = value or summary.name
            elif metric == "fingerprint":
                summary.fingerprint = value
            elif metric == "status":
                summary.status = value
            elif metric == "objective_cost":
                summary.objective_cost = float(value)
            elif metric == "peak_grid_mw":
                summary.peak_grid[key] = float(value)
            elif metric == "grid_energy_mwh":
                summary.grid_energy[key] = float(value)
            elif metric == "apron_energy_mwh":
                summary.apron_energy[key] = float(value)
            elif metric == "landside_energy_mwh":
                summary.landside_energy[key] = float(value)
    return summary


@dataclass
class ComparisonReport:
    baseline: RunSummary
    variants: list[RunSummary]

    @property
    def savings(self) -> dict[str, float]:
        """Relative cost savings per variant: 1 - cost/baseline_cost."""
        base = self.baseline.objective_cost
        return {v.name: 1.0 - v.objective_cost / base if base else 0.0 for v in self.variants}

    def energy_shift(self) -> list[tuple[str, str, float, float, float]]:
        """(variant, airport, baseline apron MWh, variant apron MWh, delta)."""
        rows = []
        for v in self.variants:
            for h in sorted(self.baseline.apron_energy):
                b = self.baseline.apron_energy.get(h, 0.0)
                a = v.apron_energy.get(h, 0.0)
                rows.append((v.name, h, b, a, a - b))
        return rows

    def peak_delta(self) -> list[tuple[str, str, float]]:
        rows = []
        for v in self.variants:
            for h in sorted(self.baseline.peak_grid):
                rows.append((v.name, h, v.peak_grid.get(h, 0.0) - self.baseline.peak_grid[h]))
        return rows


def compare(baseline: RunSummary, variants: list[RunSummary]) -> ComparisonReport:
    """Cost and energy comparison; refuses summaries from different scenarios."""
    for v in variants:
        if v.fingerprint != baseline.fingerprint:
            raise CompareError(
                f"variant {v.name!r} fingerprint {v.fingerprint[:12]}... does not match "
                f"baseline {baseline.fingerprint[:12]}..."
            )
    return ComparisonReport(baseline=baseline, variants=list(variants))


def write_comparison_csv(cmp_report: ComparisonReport, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("section,variant,airport,value\n")
        fh.write(f"baseline_cost,{cmp_report.baseline.name},,{_fmt(cmp_report.baseline.objective_cost)}\n")
        for v in cmp_report.variants:
            fh.write(f"variant_cost,{v.name},,{_fmt(v.objective_cost)}\n")
        for name, s in cmp_report.savings.items():
            fh.write(f"savings,{name},,{_fmt(s)}\n")
        for name, h, b, a, d in cmp_report.energy_shift():
            fh.write(f"apron_energy_delta_mwh,{name},{h},{_fmt(d)}\n")
        for name, h, d in cmp_report.peak_delta():
            fh.write(f"peak_grid_delta_mw,{name},{h},{_fmt(d)}\n")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="airv2g", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="solve one scenario and write reports")
    p_run.add_argument("--scenario", required=True)
    p_run.add_argument("--chargers", type=int, help="override charger count at V2G airports")
    p_run.add_argument("--grid-cap", type=float, help="override grid cap (MW) at all airports")
    p_run.add_argument("--seed", type=int, help="override occupancy seeds")
    p_run.add_argument("--out", default="out")
    p_run.add_argument("--backend", choices=["auto", "external", "reference"], default="auto")
    p_run.add_argument("--export-mps", action="store_true")

    p_cmp = sub.add_parser("compare", help="compare run directories against a baseline")
    p_cmp.add_argument("--baseline", required=True)
    p_cmp.add_argument("--variant", action="append", required=True)
    p_cmp.add_argument("--out", default=None, help="comparison CSV path")

    p_plot = sub.add_parser("plot", help="render SVG figures from a run directory")
    p_plot.add_argument("--report", required=True)

    args = parser.parse_args(argv)

    if args.command == "run":
        scenario = load_scenario(args.scenario)
        scenario = scenario.with_overrides(
            chargers=args.chargers, grid_cap=args.grid_cap, seed=args.seed
        )
        result = run_scenario(
            scenario,
            out_dir=args.out,
            solver_config=solver.SolverConfig(backend=args.backend),
            export_mps=args.export_mps,
        )
        if result.outcome.status == solver.OPTIMAL:
            print(f"optimal: cost {result.outcome.objective:.4f} -> {args.out}")
            if result.verification is not None and not result.verification.passed:
                print("verification FAILED:\n" + str(result.verification))
                return 3
            return 0
        print(f"solve ended {result.outcome.status}: {result.outcome.message}")
        if result.diagnosis:
            print(result.diagnosis.get("note", ""))
            return 2
        return 3

    if args.command == "compare":
        baseline = read_summary(args.baseline)
        variants = [read_summary(v) for v in args.variant]
        cmp_report = compare(baseline, variants)
        print(f"baseline {baseline.name}: cost {baseline.objective_cost:.4f}")
        for v in cmp_report.variants:
            s = cmp_report.savings[v.name]
            print(f"  {v.name}: cost {v.objective_cost:.4f}  savings {100 * s:.2f} %")
        if args.out:
            write_comparison_csv(cmp_report, args.out)
        return 0

    if args.command == "plot":
        from . import plots

        written = plots.emit_plots_from_dir(args.report)
        for p in written:
            print(p)
        return 0
    return 1


if __name__ == "__main__":
    sys.exit(main())
