"""Sparse LP assembly for the grid-cost minimization problem.

Builds the full linear program for a scenario: per-aircraft battery dynamics
and flight-energy requirements, per-airport power balances and grid caps,
per-airport aggregated EV-fleet transport dynamics with departure-SoC
obligations, and day-periodicity rows.  Only grid power carries an objective
coefficient, so the optimal value is exactly the day's wholesale energy bill.

Battery bookkeeping convention: the battery trajectory is frozen at its
pre-departure level for the whole flight (no apron power while airborne), and
the flight's energy is deducted on the transition out of the arrival step.
At every arrival step the battery therefore still shows the departure level,
which must cover the reserve floor plus the flight energy.  Flights arriving
exactly at the horizon end have their pending deduction folded into the
periodicity row instead.
"""

import bisect
import math
from dataclasses import dataclass, field

import numpy as np

from . import evfleet, schedule
from .evfleet import OccupancyStream, SocGrid, validate_cfl
from .schedule import GroundIndicator, Horizon

INF = float("inf")


class BuildError(ValueError):
    """Scenario cannot be assembled into a model."""


class ExtractionError(ValueError):
    """Raw solution vector does not match the model."""


class MpsFormatError(ValueError):
    """Unreadable LP interchange text."""


@dataclass(frozen=True)
class PriceSeries:
    """Per-zone grid energy cost in currency/MWh, one value per step."""

    zones: dict[str, np.ndarray]
    steps: int

    def price(self, zone: str, k: int) -> float:
        return float(self.zones[zone][k])

    def scaled(self, alpha: float) -> "PriceSeries":
        return PriceSeries({z: alpha * v for z, v in self.zones.items()}, self.steps)


_KINDS = ("Eb", "Pb", "Pgr", "Pa", "Pc", "Xc", "Xi", "Xd", "Uc", "Ud", "Vout")


class VarIndex:
    """Bijective map between named decision variables and dense LP columns.

    Column order: per-aircraft blocks (battery energy over steps 0..N, then
    apron charge power over 0..N-1), then per-airport power blocks (grid,
    apron, landside), then per-charger-airport fleet blocks (state counts
    bucket-major over 0..N, then transfers and departures over 0..N-1).
    """

    def __init__(
        self,
        aircraft_ids: tuple[int, ...],
        airport_ids: tuple[str, ...],
        charger_airport_ids: tuple[str, ...],
        buckets: int,
        steps: int,
    ):
        self.aircraft_ids = tuple(aircraft_ids)
        self.airport_ids = tuple(airport_ids)
        self.charger_airport_ids = tuple(charger_airport_ids)
        self.buckets = buckets
        self.steps = steps
        self._aircraft_pos = {a: i for i, a in enumerate(self.aircraft_ids)}
        self._airport_pos = {h: i for i, h in enumerate(self.airport_ids)}
        self._charger_pos = {h: i for i, h in enumerate(self.charger_airport_ids)}

        self._blocks: list[tuple[str, object, int, int]] = []  # (kind, key, start, length)
        self._starts: list[int] = []
        n = 0
        N = steps
        for a in self.aircraft_ids:
            n = self._add_block("Eb", a, n, N + 1)
            n = self._add_block("Pb", a, n, N)
        for h in self.airport_ids:
            for kind in ("Pgr", "Pa", "Pc"):
                n = self._add_block(kind, h, n, N)
        for h in self.charger_airport_ids:
            for kind in ("Xc", "Xi", "Xd"):
                n = self._add_block(kind, h, n, buckets * (N + 1))
            for kind in ("Uc", "Ud", "Vout"):
                n = self._add_block(kind, h, n, buckets * N)
        self.columns = n

    def _add_block(self, kind, key, start, length):
        self._blocks.append((kind, key, start, length))
        self._starts.append(start)
        return start + length

    @staticmethod
    def count_columns(n_aircraft, n_airports, n_charger_airports, buckets, steps):
        """Closed-form column count matching the block layout above."""
        N = steps
        return (
            n_aircraft * (2 * N + 1)
            + n_airports * 3 * N
            + n_charger_airports * (3 * buckets * (N + 1) + 3 * buckets * N)
        )

    def eb(self, aircraft: int, k: int) -> int:
        return self._lookup("Eb", self._aircraft_pos[aircraft] * 2, k, self.steps + 1)

    def pb(self, aircraft: int, k: int) -> int:
        return self._lookup("Pb", self._aircraft_pos[aircraft] * 2 + 1, k, self.steps)

    def _lookup(self, kind, block_idx, offset, length):
        b_kind, _, start, _ = self._blocks[block_idx]
        assert b_kind == kind
        if not 0 <= offset < length:
            raise IndexError(f"{kind} offset {offset} outside block of length {length}")
        return start + offset

    def _power_block_idx(self, kind, airport):
        base = len(self.aircraft_ids) * 2
        order = {"Pgr": 0, "Pa": 1, "Pc": 2}
        return base + self._airport_pos[airport] * 3 + order[kind]

    def pgr(self, airport: str, k: int) -> int:
        return self._lookup("Pgr", self._power_block_idx("Pgr", airport), k, self.steps)

    def pa(self, airport: str, k: int) -> int:
        return self._lookup("Pa", self._power_block_idx("Pa", airport), k, self.steps)

    def pc(self, airport: str, k: int) -> int:
        return self._lookup("Pc", self._power_block_idx("Pc", airport), k, self.steps)

    def _fleet_block_idx(self, kind, airport):
        base = len(self.aircraft_ids) * 2 + len(self.airport_ids) * 3
        order = {"Xc": 0, "Xi": 1, "Xd": 2, "Uc": 3, "Ud": 4, "Vout": 5}
        return base + self._charger_pos[airport] * 6 + order[kind]

    def _fleet(self, kind, airport, bucket, k, per_bucket):
        if not 0 <= bucket < self.buckets:
            raise IndexError(f"bucket {bucket} outside 0..{self.buckets - 1}")
        return self._lookup(
            kind, self._fleet_block_idx(kind, airport), bucket * per_bucket + k, self.buckets * per_bucket
        )

    def xc(self, airport: str, bucket: int, k: int) -> int:
        return self._fleet("Xc", airport, bucket, k, self.steps + 1)

    def xi(self, airport: str, bucket: int, k: int) -> int:
        return self._fleet("Xi", airport, bucket, k, self.steps + 1)

    def xd(self, airport: str, bucket: int, k: int) -> int:
        return self._fleet("Xd", airport, bucket, k, self.steps + 1)

    def uc(self, airport: str, bucket: int, k: int) -> int:
        return self._fleet("Uc", airport, bucket, k, self.steps)

    def ud(self, airport: str, bucket: int, k: int) -> int:
        return self._fleet("Ud", airport, bucket, k, self.steps)

    def vout(self, airport: str, bucket: int, k: int) -> int:
        return self._fleet("Vout", airport, bucket, k, self.steps)

    def decode(self, column: int) -> tuple[str, tuple]:
        """Inverse map: column -> (kind, indices)."""
        if not 0 <= column < self.columns:
            raise IndexError(f"column {column} outside 0..{self.columns - 1}")
        i = bisect.bisect_right(self._starts, column) - 1
        kind, key, start, length = self._blocks[i]
        off = column - start
        if kind in ("Eb", "Pb", "Pgr", "Pa", "Pc"):
            return kind, (key, off)
        per_bucket = self.steps + 1 if kind in ("Xc", "Xi", "Xd") else self.steps
        return kind, (key, off // per_bucket, off % per_bucket)

    def label(self, column: int) -> str:
        kind, idx = self.decode(column)
        if len(idx) == 2:
            return f"{kind}_{idx[0]}_k{idx[1]}"
        return f"{kind}_{idx[0]}_b{idx[1] + 1}_k{idx[2]}"

    def column_of(self, kind: str, indices: tuple) -> int:
        fn = {
            "Eb": self.eb, "Pb": self.pb, "Pgr": self.pgr, "Pa": self.pa, "Pc": self.pc,
            "Xc": self.xc, "Xi": self.xi, "Xd": self.xd,
            "Uc": self.uc, "Ud": self.ud, "Vout": self.vout,
        }[kind]
        return fn(*indices)


@dataclass
class LpModel:
    """Sparse LP in triplet form with two-sided row and column bounds."""

    n_cols: int
    a_rows: np.ndarray
    a_cols: np.ndarray
    a_vals: np.ndarray
    row_lower: np.ndarray
    row_upper: np.ndarray
    col_lower: np.ndarray
    col_upper: np.ndarray
    objective: np.ndarray
    index: VarIndex | None = None
    row_group: list[str] = field(default_factory=list)
    row_label: list[str] = field(default_factory=list)
    col_names: list[str] | None = None
    name: str = "model"
    meta: dict = field(default_factory=dict)

    @property
    def n_rows(self) -> int:
        return len(self.row_lower)

    def col_name(self, j: int) -> str:
        if self.col_names is not None:
            return self.col_names[j]
        if self.index is not None:
            return self.index.label(j)
        return f"C{j}"

    def row_activity(self, x: np.ndarray) -> np.ndarray:
        ax = np.zeros(self.n_rows)
        np.add.at(ax, self.a_rows, self.a_vals * x[self.a_cols])
        return ax


class _Assembler:
    def __init__(self, n_cols: int):
        self.n_cols = n_cols
        self.rows: list[int] = []
        self.cols: list[int] = []
        self.vals: list[float] = []
        self.lower: list[float] = []
        self.upper: list[float] = []
        self.group: list[str] = []
        self.label: list[str] = []

    def add(self, cols, vals, lower, upper, group, label):
        r = len(self.lower)
        for c, v in zip(cols, vals):
            if v == 0.0:
                continue
            self.rows.append(r)
            self.cols.append(c)
            self.vals.append(float(v))
        self.lower.append(lower)
        self.upper.append(upper)
        self.group.append(group)
        self.label.append(label)
        return r

    def finish(self, col_lower, col_upper, objective, index, name, meta) -> LpModel:
        return LpModel(
            n_cols=self.n_cols,
            a_rows=np.asarray(self.rows, dtype=np.int64),
            a_cols=np.asarray(self.cols, dtype=np.int64),
            a_vals=np.asarray(self.vals, dtype=np.float64),
            row_lower=np.asarray(self.lower, dtype=np.float64),
            row_upper=np.asarray(self.upper, dtype=np.float64),
            col_lower=np.asarray(col_lower, dtype=np.float64),
            col_upper=np.asarray(col_upper, dtype=np.float64),
            objective=np.asarray(objective, dtype=np.float64),
            index=index,
            row_group=self.group,
            row_label=self.label,
            name=name,
            meta=meta,
        )


GROUND, FREEZE, DEDUCT = 0, 1, 2


def _aircraft_step_plan(rotation, flight_set, steps):
    """Classify each step transition of one aircraft and collect arrival data.

    Returns (kind[k], deduct[k], arrivals, pending) where arrivals is a list of
    (arrival step within horizon, flight energy) and pending is the energy of
    flights arriving exactly at the horizon end, to be settled by the
    periodicity row.
    """
    kind = np.full(steps, GROUND, dtype=np.int8)
    deduct = np.zeros(steps)
    arrivals: list[tuple[int, float]] = []
    pending = 0.0
    wrap_link = False
    for fid in rotation.flights:
        f = flight_set.by_id(fid)
        if f.arrive_step > steps:  # wrapped across the day boundary
            a = f.arrive_step - steps
            kind[f.depart_step :] = FREEZE
            kind[: a] = FREEZE
            kind[a] = DEDUCT
            deduct[a] = f.energy
            arrivals.append((a, f.energy))
            wrap_link = True
        elif f.arrive_step == steps:
            kind[f.depart_step :] = FREEZE
            arrivals.append((steps, f.energy))
            pending += f.energy
        else:
            kind[f.depart_step : f.arrive_step] = FREEZE
            kind[f.arrive_step] = DEDUCT
            deduct[f.arrive_step] = f.energy
            arrivals.append((f.arrive_step, f.energy))
    return kind, deduct, arrivals, pending, wrap_link


def build_problem(scenario) -> LpModel:
    """Assemble the scenario into an LpModel (see module docstring for the rows)."""
    horizon: Horizon = scenario.horizon
    N = horizon.steps
    dt = horizon.dt_hours
    params = scenario.params
    airports = scenario.airports
    airport_ids = tuple(sorted(airports))

    # static feasibility and reference checks before any assembly
    for f in scenario.flights:
        if f.energy > params.battery_capacity - params.reserve + 1e-12:
            raise BuildError(
                f"flight {f.id} needs {f.energy:.3f} MWh, exceeds battery capacity "
                f"minus reserve ({params.battery_capacity - params.reserve:.3f} MWh)"
            )
    prices: PriceSeries = scenario.prices
    for h in airport_ids:
        zone = airports[h].price_zone
        if zone not in prices.zones:
            raise BuildError(f"no price series for zone {zone!r} (airport {h})")
        if len(prices.zones[zone]) < N:
            raise BuildError(f"price series for zone {zone!r} covers {len(prices.zones[zone])} steps, need {N}")

    grids: dict[str, SocGrid] = scenario.grids()
    for h, grid in grids.items():
        validate_cfl(grid)
    streams: dict[str, OccupancyStream] = scenario.streams()
    charger_ids = tuple(h for h in airport_ids if airports[h].v2g_chargers > 0)
    for h in charger_ids:
        if h not in streams:
            streams[h] = evfleet.empty_stream(grids[h].buckets, N)

    rotations = scenario.ensure_rotations()
    ground: GroundIndicator = schedule.ground_indicator(
        rotations, scenario.flights, airports, scenario.turnaround_steps
    )
    aircraft_ids = ground.aircraft_ids
    buckets = grids[charger_ids[0]].buckets if charger_ids else scenario.soc_buckets

    index = VarIndex(aircraft_ids, airport_ids, charger_ids, buckets, N)
    asm = _Assembler(index.columns)

    col_lower = np.zeros(index.columns)
    col_upper = np.full(index.columns, INF)
    objective = np.zeros(index.columns)

    eta = scenario.charge_efficiency
    h_pos = {h: i for i, h in enumerate(ground.airport_ids)}

    # ---- aircraft columns, flight coupling, and charge dynamics ----------
    flight_lookup = {r.aircraft_id: r for r in rotations}
    pending_by_aircraft: dict[int, float] = {}
    for p_idx, a_id in enumerate(aircraft_ids):
        rot = flight_lookup[a_id]
        kind, deduct, arrivals, pending, wrap_link = _aircraft_step_plan(rot, scenario.flights, N)
        pending_by_aircraft[a_id] = pending
        on_ground = ground.g[p_idx].any(axis=0)
        for k in range(N + 1):
            col = index.eb(a_id, k)
            col_lower[col] = params.reserve
            col_upper[col] = params.battery_capacity
        for k in range(N):
            col = index.pb(a_id, k)
            col_upper[col] = params.max_charge_power if on_ground[k] else 0.0
        for k in range(N):
            e0, e1, pb = index.eb(a_id, k), index.eb(a_id, k + 1), index.pb(a_id, k)
            if kind[k] == FREEZE:
                asm.add([e1, e0], [1.0, -1.0], 0.0, 0.0, "flight_coupling", f"frz_{a_id}_k{k}")
            elif kind[k] == DEDUCT:
                asm.add(
                    [e1, e0, pb],
                    [1.0, -1.0, -dt],
                    -INF,
                    -deduct[k],
                    "battery_charge",
                    f"ded_{a_id}_k{k}",
                )
            else:
                asm.add([e1, e0, pb], [1.0, -1.0, -dt], -INF, 0.0, "battery_charge", f"chg_{a_id}_k{k}")
        for a, energy in arrivals:
            asm.add(
                [index.eb(a_id, a)],
                [1.0],
                params.reserve + energy,
                INF,
                "arrival_energy",
                f"arr_{a_id}_k{a}",
            )
        if wrap_link:
            asm.add(
                [index.eb(a_id, 0), index.eb(a_id, N)],
                [1.0, -1.0],
                0.0,
                0.0,
                "flight_coupling",
                f"wrap_{a_id}",
            )
        asm.add(
            [index.eb(a_id, N), index.eb(a_id, 0)],
            [1.0, -1.0],
            pending,
            INF,
            "periodicity_battery",
            f"per_{a_id}",
        )

    # ---- airport power balances ------------------------------------------
    for h in airport_ids:
        ap = airports[h]
        zone_prices = prices.zones[ap.price_zone]
        hp = h_pos[h]
        for k in range(N):
            pgr, pa, pc = index.pgr(h, k), index.pa(h, k), index.pc(h, k)
            col_lower[pgr] = -ap.grid_cap if scenario.allow_grid_export else 0.0
            col_upper[pgr] = ap.grid_cap
            col_lower[pa], col_upper[pa] = 0.0, INF
            if h in charger_ids:
                col_lower[pc], col_upper[pc] = -INF, INF
            else:
                col_lower[pc], col_upper[pc] = 0.0, 0.0
            objective[pgr] = float(zone_prices[k]) * dt

            parked = [index.pb(a_id, k) for p_idx, a_id in enumerate(aircraft_ids) if ground.g[p_idx, hp, k]]
            asm.add([pa] + parked, [1.0] + [-1.0] * len(parked), 0.0, 0.0, "apron_sum", f"apr_{h}_k{k}")
            asm.add([pa, pgr, pc], [1.0, -1.0, 1.0], 0.0, 0.0, "power_split", f"spl_{h}_k{k}")

    # ---- aggregated fleet dynamics per charger airport ---------------------
    for h in charger_ids:
        grid = grids[h]
        stream = streams[h]
        if stream.buckets != grid.buckets or stream.steps != N:
            raise BuildError(
                f"occupancy stream for {h} has shape ({stream.buckets},{stream.steps}), "
                f"expected ({grid.buckets},{N})"
            )
        nv = grid.nu
        ap = airports[h]
        p_mw = ap.charger_power / 1000.0
        B = grid.buckets
        for b in range(B):
            c0 = index.xc(h, b, 0)
            col_lower[c0] = col_upper[c0] = 0.0
            d0 = index.xd(h, b, 0)
            col_lower[d0] = col_upper[d0] = 0.0
            i0 = index.xi(h, b, 0)
            col_lower[i0] = col_upper[i0] = float(stream.initial_idle[b])
            for k in range(N):
                for u_col in (index.uc(h, b, k), index.ud(h, b, k)):
                    col_lower[u_col] = -INF
        for k in range(N):
            for b in range(B):
                cols = [index.xc(h, b, k + 1), index.xc(h, b, k), index.uc(h, b, k)]
                vals = [1.0, -(1.0 - nv), -1.0]
                if b > 0:
                    cols.append(index.xc(h, b - 1, k))
                    vals.append(-nv)
                asm.add(cols, vals, 0.0, 0.0, "fleet_charge_dyn", f"xc_{h}_b{b + 1}_k{k}")

                cols = [index.xd(h, b, k + 1), index.xd(h, b, k), index.ud(h, b, k)]
                vals = [1.0, -(1.0 - nv), -1.0]
                if b < B - 1:
                    cols.append(index.xd(h, b + 1, k))
                    vals.append(-nv)
                asm.add(cols, vals, 0.0, 0.0, "fleet_discharge_dyn", f"xd_{h}_b{b + 1}_k{k}")

                cols = [
                    index.xi(h, b, k + 1),
                    index.xi(h, b, k),
                    index.uc(h, b, k),
                    index.ud(h, b, k),
                    index.vout(h, b, k),
                ]
                vals = [1.0, -1.0, 1.0, 1.0, 1.0]
                if b == B - 1:
                    cols.append(index.xc(h, B - 1, k))
                    vals.append(-nv)
                if b == 0:
                    cols.append(index.xd(h, 0, k))
                    vals.append(-nv)
                rhs = float(stream.v_in[b, k])
                asm.add(cols, vals, rhs, rhs, "fleet_idle_dyn", f"xi_{h}_b{b + 1}_k{k}")

            cols = [index.pc(h, k)]
            vals = [1.0]
            for b in range(B):
                cols.append(index.xc(h, b, k))
                vals.append(-p_mw / eta)
                cols.append(index.xd(h, b, k))
                vals.append(p_mw * eta)
            asm.add(cols, vals, 0.0, 0.0, "lot_power", f"pc_{h}_k{k}")

            tot = float(stream.departures_total[k])
            asm.add(
                [index.vout(h, b, k) for b in range(B)],
                [1.0] * B,
                tot,
                tot,
                "departure_total",
                f"dep_{h}_k{k}",
            )
            for b in range(1, B):
                asm.add(
                    [index.vout(h, l, k) for l in range(b, B)],
                    [1.0] * (B - b),
                    float(stream.v_out_ref[b, k]),
                    INF,
                    "departure_soc",
                    f"soc_{h}_b{b + 1}_k{k}",
                )
        for k in range(N + 1):
            cols = [index.xc(h, b, k) for b in range(B)] + [index.xd(h, b, k) for b in range(B)]
            asm.add(cols, [1.0] * (2 * B), -INF, float(ap.v2g_chargers), "charger_cap", f"cap_{h}_k{k}")
        cols, vals = [], []
        for b in range(B):
            w = float(b + 1)
            for col in (index.xc(h, b, N), index.xi(h, b, N), index.xd(h, b, N)):
                cols.append(col)
                vals.append(w)
            for col in (index.xc(h, b, 0), index.xi(h, b, 0), index.xd(h, b, 0)):
                cols.append(col)
                vals.append(-w)
        asm.add(cols, vals, 0.0, INF, "periodicity_fleet", f"perf_{h}")

    meta = {
        "dt_hours": dt,
        "steps": N,
        "ground": ground,
        "grids": grids,
        "streams": streams,
        "rotations": rotations,
        "pending_deductions": pending_by_aircraft,
        "fingerprint": getattr(scenario, "fingerprint", ""),
        "scenario_name": getattr(scenario, "name", "scenario"),
    }
    return asm.finish(col_lower, col_upper, objective, index, getattr(scenario, "name", "model"), meta)


def variable_index(index: VarIndex, kind: str, indices: tuple) -> int:
    """Column of a named decision variable (thin wrapper over the index map)."""
    if kind not in _KINDS:
        raise IndexError(f"unknown variable kind {kind!r}")
    return index.column_of(kind, indices)


def residuals(model: LpModel, x: np.ndarray) -> dict[str, float]:
    """Max constraint violation per row group, plus column-bound violations.

    Everything is evaluated in original model units.
    """
    if len(x) != model.n_cols:
        raise ExtractionError(f"vector length {len(x)} != columns {model.n_cols}")
    ax = model.row_activity(x)
    below = np.where(np.isfinite(model.row_lower), model.row_lower - ax, 0.0)
    above = np.where(np.isfinite(model.row_upper), ax - model.row_upper, 0.0)
    viol = np.maximum(np.maximum(below, above), 0.0)
    out: dict[str, float] = {}
    for g in set(model.row_group):
        out[g] = 0.0
    for r, v in enumerate(viol):
        g = model.row_group[r]
        if v > out[g]:
            out[g] = float(v)
    lo = np.where(np.isfinite(model.col_lower), model.col_lower - x, 0.0)
    hi = np.where(np.isfinite(model.col_upper), x - model.col_upper, 0.0)
    out["col_bounds"] = float(np.maximum(np.maximum(lo, hi), 0.0).max(initial=0.0))
    return out


@dataclass
class SolutionReport:
    """Domain-level view of a raw LP solution."""

    objective_cost: float
    recomputed_cost: float
    grid_power: dict[str, np.ndarray]  # MW per (airport, step)
    apron_power: dict[str, np.ndarray]
    landside_power: dict[str, np.ndarray]
    battery_energy: dict[int, np.ndarray]  # MWh per (aircraft, step 0..N)
    charge_power: dict[int, np.ndarray]  # MW per (aircraft, step)
    fleet: dict[str, evfleet.FleetState]
    v_out: dict[str, np.ndarray]
    residual_summary: dict[str, float]
    charge_slack: dict[int, float]  # max unexplained battery drop per aircraft
    meta: dict = field(default_factory=dict)

    @property
    def airports(self) -> list[str]:
        return sorted(self.grid_power)

    def peak_grid(self, airport: str) -> float:
        return float(self.grid_power[airport].max(initial=0.0))

    def grid_energy(self, airport: str) -> float:
        return float(self.grid_power[airport].sum() * self.meta.get("dt_hours", 1.0))

    def apron_energy(self, airport: str) -> float:
        return float(self.apron_power[airport].sum() * self.meta.get("dt_hours", 1.0))


def extract_solution(model: LpModel, x: np.ndarray, objective: float) -> SolutionReport:
    """Map the raw primal vector back to per-airport and per-aircraft trajectories."""
    if len(x) != model.n_cols:
        raise ExtractionError(f"vector length {len(x)} != columns {model.n_cols}")
    index = model.index
    if index is None:
        raise ExtractionError("model carries no variable index (imported from interchange text?)")
    N = index.steps
    grid_power, apron_power, landside_power = {}, {}, {}
    for h in index.airport_ids:
        grid_power[h] = np.array([x[index.pgr(h, k)] for k in range(N)])
        apron_power[h] = np.array([x[index.pa(h, k)] for k in range(N)])
        landside_power[h] = np.array([x[index.pc(h, k)] for k in range(N)])
    battery, charge = {}, {}
    for a in index.aircraft_ids:
        battery[a] = np.array([x[index.eb(a, k)] for k in range(N + 1)])
        charge[a] = np.array([x[index.pb(a, k)] for k in range(N)])
    fleet, v_out = {}, {}
    for h in index.charger_airport_ids:
        B = index.buckets
        st = evfleet.FleetState(
            x_c=np.array([[x[index.xc(h, b, k)] for k in range(N + 1)] for b in range(B)]),
            x_i=np.array([[x[index.xi(h, b, k)] for k in range(N + 1)] for b in range(B)]),
            x_d=np.array([[x[index.xd(h, b, k)] for k in range(N + 1)] for b in range(B)]),
        )
        fleet[h] = st
        v_out[h] = np.array([[x[index.vout(h, b, k)] for k in range(N)] for b in range(B)])

    # unexplained battery drops: slack in the charge inequality beyond deductions
    ax = model.row_activity(x)
    slack: dict[int, float] = {a: 0.0 for a in index.aircraft_ids}
    for r, g in enumerate(model.row_group):
        if g != "battery_charge":
            continue
        gap = float(model.row_upper[r] - ax[r])
        a_id = int(model.row_label[r].split("_")[1])
        if gap > slack[a_id]:
            slack[a_id] = gap

    recomputed = float(model.objective @ x)
    return SolutionReport(
        objective_cost=float(objective),
        recomputed_cost=recomputed,
        grid_power=grid_power,
        apron_power=apron_power,
        landside_power=landside_power,
        battery_energy=battery,
        charge_power=charge,
        fleet=fleet,
        v_out=v_out,
        residual_summary=residuals(model, x),
        charge_slack=slack,
        meta=dict(model.meta),
    )


def relax_grid_caps(model: LpModel) -> tuple[LpModel, dict[str, int]]:
    """Elastic variant: grid caps may be exceeded by a per-airport slack.

    The returned model minimizes the total cap increase; solving it tells how
    much more grid connection each airport would need for feasibility.
    """
    index = model.index
    if index is None:
        raise BuildError("grid-cap relaxation needs a model with a variable index")
    n_extra = len(index.airport_ids)
    n_cols = model.n_cols + n_extra
    sigma = {h: model.n_cols + i for i, h in enumerate(index.airport_ids)}

    rows = list(model.a_rows)
    cols = list(model.a_cols)
    vals = list(model.a_vals)
    row_lower = list(model.row_lower)
    row_upper = list(model.row_upper)
    group = list(model.row_group)
    label = list(model.row_label)

    col_lower = np.concatenate([model.col_lower, np.zeros(n_extra)])
    col_upper = np.concatenate([model.col_upper, np.full(n_extra, INF)])
    objective = np.concatenate([np.zeros(model.n_cols), np.ones(n_extra)])

    for h in index.airport_ids:
        for k in range(index.steps):
            j = index.pgr(h, k)
            cap = model.col_upper[j]
            r = len(row_lower)
            rows.extend([r, r])
            cols.extend([j, sigma[h]])
            vals.extend([1.0, -1.0])
            row_lower.append(-INF)
            row_upper.append(float(cap))
            group.append("elastic_cap")
            label.append(f"ecap_{h}_k{k}")
    for h in index.airport_ids:
        for k in range(index.steps):
            col_upper[index.pgr(h, k)] = INF

    relaxed = LpModel(
        n_cols=n_cols,
        a_rows=np.asarray(rows, dtype=np.int64),
        a_cols=np.asarray(cols, dtype=np.int64),
        a_vals=np.asarray(vals, dtype=np.float64),
        row_lower=np.asarray(row_lower),
        row_upper=np.asarray(row_upper),
        col_lower=col_lower,
        col_upper=col_upper,
        objective=objective,
        index=None,
        row_group=group,
        row_label=label,
        col_names=[model.col_name(j) for j in range(model.n_cols)]
        + [f"sigma_{h}" for h in index.airport_ids],
        name=model.name + "_elastic",
        meta=dict(model.meta),
    )
    return relaxed, sigma


# ---------------------------------------------------------------------------
# LP interchange text (MPS-style fixed sections)
# ---------------------------------------------------------------------------


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def write_mps(model: LpModel) -> str:
    """Serialize the model in MPS fixed sections for cross-solver checking."""
    lines = [f"NAME          {model.name}", "ROWS", " N  COST"]
    senses = []
    for r in range(model.n_rows):
        lo, hi = model.row_lower[r], model.row_upper[r]
        name = f"R{r:07d}"
        if lo == hi:
            senses.append(("E", name, lo, None))
        elif math.isfinite(hi) and not math.isfinite(lo):
            senses.append(("L", name, hi, None))
        elif math.isfinite(lo) and not math.isfinite(hi):
            senses.append(("G", name, lo, None))
        elif math.isfinite(lo) and math.isfinite(hi):
            senses.append(("L", name, hi, hi - lo))  # RANGES entry
        else:
            senses.append(("N", name, 0.0, None))  # unconstrained row
        lines.append(f" {senses[-1][0]}  {name}")

    by_col: dict[int, list[tuple[str, float]]] = {j: [] for j in range(model.n_cols)}
    for r, c, v in zip(model.a_rows, model.a_cols, model.a_vals):
        by_col[int(c)].append((f"R{int(r):07d}", float(v)))
    lines.append("COLUMNS")
    for j in range(model.n_cols):
        cname = model.col_name(j)
        entries = list(by_col[j])
        if model.objective[j] != 0.0 or not entries:
            entries.insert(0, ("COST", float(model.objective[j])))
        for rname, v in entries:
            lines.append(f"    {cname}  {rname}  {_fmt(v)}")

    lines.append("RHS")
    for sense, name, rhs, _ in senses:
        if sense != "N" and rhs != 0.0:
            lines.append(f"    RHS  {name}  {_fmt(rhs)}")
    ranges = [(name, rng) for sense, name, _, rng in senses if rng is not None]
    if ranges:
        lines.append("RANGES")
        for name, rng in ranges:
            lines.append(f"    RNG  {name}  {_fmt(rng)}")

    lines.append("BOUNDS")
    for j in range(model.n_cols):
        lo, hi = model.col_lower[j], model.col_upper[j]
        cname = model.col_name(j)
        if lo == hi:
            lines.append(f" FX BND  {cname}  {_fmt(lo)}")
        elif not math.isfinite(lo) and not math.isfinite(hi):
            lines.append(f" FR BND  {cname}")
        else:
            if not math.isfinite(lo):
                lines.append(f" MI BND  {cname}")
            elif lo != 0.0:
                lines.append(f" LO BND  {cname}  {_fmt(lo)}")
            if math.isfinite(hi):
                lines.append(f" UP BND  {cname}  {_fmt(hi)}")
    lines.append("ENDATA")
    return "\n".join(lines) + "\n"


def read_mps(text: str) -> LpModel:
    """Parse the interchange subset emitted by `write_mps`."""
    section = None
    name = "model"
    row_sense: dict[str, str] = {}
    row_order: list[str] = []
    obj_row = None
    col_order: list[str] = []
    col_pos: dict[str, int] = {}
    triplets: list[tuple[str, str, float]] = []
    obj_coeff: dict[str, float] = {}
    rhs: dict[str, float] = {}
    rng: dict[str, float] = {}
    bnd_lo: dict[str, float] = {}
    bnd_hi: dict[str, float] = {}
    bnd_free: set[str] = set()
    bnd_mi: set[str] = set()
    bnd_fx: dict[str, float] = {}

    for raw in text.splitlines():
        if not raw.strip() or raw.startswith("*"):
            continue
        head = raw.split()
        if raw[0] not in " \t":
            key = head[0].upper()
            if key == "NAME":
                name = head[1] if len(head) > 1 else name
                section = None
            elif key in ("ROWS", "COLUMNS", "RHS", "RANGES", "BOUNDS", "ENDATA"):
                section = key
            else:
                raise MpsFormatError(f"unknown section line {raw!r}")
            continue
        if section == "ROWS":
            sense, rname = head[0].upper(), head[1]
            if sense == "N":
                if obj_row is None:
                    obj_row = rname
                continue
            if sense not in ("E", "L", "G"):
                raise MpsFormatError(f"bad row sense {sense!r}")
            row_sense[rname] = sense
            row_order.append(rname)
        elif section == "COLUMNS":
            cname = head[0]
            if cname not in col_pos:
                col_pos[cname] = len(col_order)
                col_order.append(cname)
            pairs = head[1:]
            if len(pairs) % 2:
                raise MpsFormatError(f"odd COLUMNS entry {raw!r}")
            for rname, v in zip(pairs[::2], pairs[1::2]):
                if rname == obj_row:
                    obj_coeff[cname] = obj_coeff.get(cname, 0.0) + float(v)
                else:
                    triplets.append((rname, cname, float(v)))
        elif section == "RHS":
            pairs = head[1:]
            for rname, v in zip(pairs[::2], pairs[1::2]):
                rhs[rname] = float(v)
        elif section == "RANGES":
            pairs = head[1:]
            for rname, v in zip(pairs[::2], pairs[1::2]):
                rng[rname] = float(v)
        elif section == "BOUNDS":
            btype, _, cname = head[0].upper(), head[1], head[2]
            if cname not in col_pos:
                col_pos[cname] = len(col_order)
                col_order.append(cname)
            if btype == "UP":
                bnd_hi[cname] = float(head[3])
            elif btype == "LO":
                bnd_lo[cname] = float(head[3])
            elif btype == "FX":
                bnd_fx[cname] = float(head[3])
            elif btype == "FR":
                bnd_free.add(cname)
            elif btype == "MI":
                bnd_mi.add(cname)
            else:
                raise MpsFormatError(f"unsupported bound type {btype!r}")

    r_pos = {rname: i for i, rname in enumerate(row_order)}
    n_rows, n_cols = len(row_order), len(col_order)
    row_lower = np.full(n_rows, -INF)
    row_upper = np.full(n_rows, INF)
    for rname in row_order:
        b = rhs.get(rname, 0.0)
        sense = row_sense[rname]
        i = r_pos[rname]
        if sense == "E":
            row_lower[i] = row_upper[i] = b
        elif sense == "L":
            row_upper[i] = b
            if rname in rng:
                row_lower[i] = b - abs(rng[rname])
        else:
            row_lower[i] = b
            if rname in rng:
                row_upper[i] = b + abs(rng[rname])

    col_lower = np.zeros(n_cols)
    col_upper = np.full(n_cols, INF)
    for cname in bnd_free:
        col_lower[col_pos[cname]] = -INF
    for cname in bnd_mi:
        col_lower[col_pos[cname]] = -INF
    for cname, v in bnd_lo.items():
        col_lower[col_pos[cname]] = v
    for cname, v in bnd_hi.items():
        col_upper[col_pos[cname]] = v
    for cname, v in bnd_fx.items():
        col_lower[col_pos[cname]] = v
        col_upper[col_pos[cname]] = v

    objective = np.zeros(n_cols)
    for cname, v in obj_coeff.items():
        objective[col_pos[cname]] = v

    return LpModel(
        n_cols=n_cols,
        a_rows=np.asarray([r_pos[r] for r, _, _ in triplets], dtype=np.int64),
        a_cols=np.asarray([col_pos[c] for _, c, _ in triplets], dtype=np.int64),
        a_vals=np.asarray([v for _, _, v in triplets], dtype=np.float64),
        row_lower=row_lower,
        row_upper=row_upper,
        col_lower=col_lower,
        col_upper=col_upper,
        objective=objective,
        index=None,
        row_group=["mps"] * n_rows,
        row_label=row_order,
        col_names=col_order,
        name=name,
    )
