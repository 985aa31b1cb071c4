"""Flight network ingestion, flight energies, and minimum-size fleet assignment.

Ingests airport and flight tables, snaps flight times onto the scheduling
grid, estimates per-flight energy from great-circle distance, chains flights
into aircraft rotations of minimum fleet size, and derives the on-ground
indicator used by the power model.
"""

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

EARTH_RADIUS_KM = 6371.0
G0 = 9.81  # m/s^2
J_PER_MWH = 3.6e9


class FlightTableError(ValueError):
    """Malformed or inconsistent flight/airport table input."""


class RotationError(ValueError):
    """Rotation violates chaining or turnaround ordering."""


@dataclass(frozen=True)
class Horizon:
    """Scheduling grid: `steps` intervals of `dt_hours` each."""

    steps: int
    dt_hours: float

    def __post_init__(self):
        if self.steps < 1 or self.dt_hours <= 0:
            raise ValueError(f"bad horizon: steps={self.steps} dt={self.dt_hours}")

    @property
    def hours(self) -> float:
        return self.steps * self.dt_hours

    @property
    def day_hours(self) -> int:
        return math.ceil(self.hours - 1e-9)

    def hour_of_step(self, k: int) -> int:
        return int(k * self.dt_hours + 1e-9)


@dataclass(frozen=True)
class Airport:
    id: str
    latitude: float
    longitude: float
    grid_cap: float  # MW
    price_zone: str
    v2g_chargers: int = 0
    charger_power: float = 22.0  # kW per charger
    ev_capacity: float = 60.0  # kWh per vehicle

    def __post_init__(self):
        if not (-90.0 <= self.latitude <= 90.0 and -180.0 <= self.longitude <= 180.0):
            raise ValueError(f"{self.id}: coordinates out of range")
        if self.grid_cap <= 0:
            raise ValueError(f"{self.id}: grid cap must be positive")
        if self.v2g_chargers < 0:
            raise ValueError(f"{self.id}: negative charger count")
        if self.charger_power <= 0 or self.ev_capacity <= 0:
            raise ValueError(f"{self.id}: charger power and EV capacity must be positive")


@dataclass(frozen=True)
class AircraftParams:
    """Narrow-body electric aircraft parameters (mass in kg, energies in MWh)."""

    mass: float = 78_000.0
    lift_to_drag: float = 23.0
    battery_capacity: float = 12.0
    reserve: float = 1.2
    max_charge_power: float = 12.0  # MW at the apron
    powertrain_efficiency: float = 0.90
    max_range_km: float = 800.0

    def __post_init__(self):
        if not 0 < self.reserve < self.battery_capacity:
            raise ValueError("reserve must lie strictly inside (0, battery_capacity)")
        if self.max_charge_power <= 0 or self.lift_to_drag <= 0:
            raise ValueError("max_charge_power and lift_to_drag must be positive")
        if not 0 < self.powertrain_efficiency <= 1:
            raise ValueError("powertrain efficiency must lie in (0, 1]")


@dataclass(frozen=True)
class Flight:
    """One scheduled leg. `arrive_step` may exceed the horizon for wrapped flights."""

    id: int
    origin: str
    destination: str
    depart_step: int
    arrive_step: int
    energy: float  # MWh

    def __post_init__(self):
        if self.depart_step >= self.arrive_step:
            raise ValueError(f"flight {self.id}: departure step must precede arrival step")
        if self.origin == self.destination:
            raise ValueError(f"flight {self.id}: origin equals destination")
        if self.energy <= 0:
            raise ValueError(f"flight {self.id}: energy must be positive")

    def wraps(self, horizon: Horizon) -> bool:
        return self.arrive_step > horizon.steps


@dataclass(frozen=True)
class FlightSet:
    flights: tuple[Flight, ...]
    horizon: Horizon

    def __len__(self):
        return len(self.flights)

    def __iter__(self):
        return iter(self.flights)

    def by_id(self, fid: int) -> Flight:
        for f in self.flights:
            if f.id == fid:
                return f
        raise KeyError(fid)


@dataclass(frozen=True)
class Rotation:
    """Ordered flight chain flown by one aircraft; `home` places idle aircraft."""

    aircraft_id: int
    flights: tuple[int, ...]
    home: str | None = None


@dataclass(frozen=True)
class GroundIndicator:
    """Boolean (aircraft, airport, step) array: plane parked at airport during [k, k+1)."""

    g: np.ndarray
    aircraft_ids: tuple[int, ...]
    airport_ids: tuple[str, ...]

    def airport_at(self, aircraft_idx: int, k: int) -> str | None:
        hs = np.nonzero(self.g[aircraft_idx, :, k])[0]
        return self.airport_ids[hs[0]] if len(hs) else None


def great_circle_km(a: tuple[float, float], b: tuple[float, float]) -> float:
    """Haversine distance in km between (lat, lon) pairs on a 6371 km sphere."""
    lat1, lon1 = math.radians(a[0]), math.radians(a[1])
    lat2, lon2 = math.radians(b[0]), math.radians(b[1])
    s = (
        math.sin((lat2 - lat1) / 2) ** 2
        + math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2) ** 2
    )
    return 2.0 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(s)))


def breguet_energy(distance_km: float, params: AircraftParams) -> float:
    """Cruise energy in MWh for a leg of `distance_km`: m*g0*d / (eta_tot * L/D).

    Linear in distance; rejects legs beyond the configured range cap.
    """
    if distance_km < 0:
        raise ValueError("negative distance")
    if distance_km > params.max_range_km:
        raise ValueError(
            f"distance {distance_km:.1f} km exceeds range cap {params.max_range_km:.1f} km"
        )
    joules = params.mass * G0 * distance_km * 1000.0
    joules /= params.powertrain_efficiency * params.lift_to_drag
    return joules / J_PER_MWH


def _parse_hhmm(text: str, line_no: int) -> int:
    t = text.strip()
    if len(t) != 4 or not t.isdigit():
        raise FlightTableError(f"line {line_no}: bad time {text!r}, expected HHMM")
    hh, mm = int(t[:2]), int(t[2:])
    if hh >= 24 or mm >= 60:
        raise FlightTableError(f"line {line_no}: time {text!r} out of range")
    return hh * 60 + mm


def _data_rows(text: str):
    """Yield (line_no, row) for non-comment, non-blank CSV lines."""
    for line_no, raw in enumerate(io.StringIO(text), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        yield line_no, next(csv.reader([line]))


FLIGHT_HEADER = ["id", "origin", "destination", "dep_hhmm", "arr_hhmm"]
AIRPORT_HEADER = ["code", "lat", "lon", "grid_cap_mw", "price_zone", "chargers", "charger_kw", "ev_kwh"]


def parse_airport_table(text: str) -> dict[str, Airport]:
    """Parse the airport CSV (`code,lat,lon,grid_cap_mw,price_zone,chargers,charger_kw,ev_kwh`)."""
    airports: dict[str, Airport] = {}
    header_seen = False
    for line_no, row in _data_rows(text):
        if not header_seen:
            if [c.strip() for c in row] != AIRPORT_HEADER:
                raise FlightTableError(f"line {line_no}: bad airport header {row}")
            header_seen = True
            continue
        if len(row) != len(AIRPORT_HEADER):
            raise FlightTableError(f"line {line_no}: expected {len(AIRPORT_HEADER)} fields")
        code = row[0].strip()
        if code in airports:
            raise FlightTableError(f"line {line_no}: duplicate airport {code}")
        try:
            airports[code] = Airport(
                id=code,
                latitude=float(row[1]),
                longitude=float(row[2]),
                grid_cap=float(row[3]),
                price_zone=row[4].strip(),
                v2g_chargers=int(row[5]),
                charger_power=float(row[6]),
                ev_capacity=float(row[7]),
            )
        except ValueError as exc:
            raise FlightTableError(f"line {line_no}: {exc}") from exc
    return airports


def parse_flight_table(
    text: str,
    horizon: Horizon,
    airports: dict[str, Airport],
    params: AircraftParams,
    wrap: bool = False,
) -> FlightSet:
    """Parse the flight CSV and snap times onto the grid.

    Departures round down to the step grid, arrivals round up, so the model
    never claims apron time the aircraft does not have.  Flights crossing
    midnight are rejected unless `wrap` is set, in which case the arrival
    step is stored past the horizon end (arrive_step > steps).
    """
    minutes_per_step = horizon.dt_hours * 60.0
    flights: list[Flight] = []
    seen_ids: set[int] = set()
    header_seen = False
    for line_no, row in _data_rows(text):
        if not header_seen:
            if [c.strip() for c in row] != FLIGHT_HEADER:
                raise FlightTableError(f"line {line_no}: bad flight header {row}")
            header_seen = True
            continue
        if len(row) != len(FLIGHT_HEADER):
            raise FlightTableError(f"line {line_no}: expected {len(FLIGHT_HEADER)} fields")
        try:
            fid = int(row[0])
        except ValueError:
            raise FlightTableError(f"line {line_no}: bad flight id {row[0]!r}") from None
        if fid in seen_ids:
            raise FlightTableError(f"line {line_no}: duplicate flight id {fid}")
        seen_ids.add(fid)
        origin, dest = row[1].strip(), row[2].strip()
        for code in (origin, dest):
            if code not in airports:
                raise FlightTableError(f"line {line_no}: unknown airport {code!r}")
        dep_min = _parse_hhmm(row[3], line_no)
        arr_min = _parse_hhmm(row[4], line_no)
        depart_step = int(dep_min // minutes_per_step)
        arrive_step = int(math.ceil(arr_min / minutes_per_step - 1e-9))
        if arr_min <= dep_min:
            if not wrap:
                raise FlightTableError(
                    f"line {line_no}: flight {fid} crosses the horizon end (enable wrap to allow)"
                )
            arrive_step += horizon.steps
        if depart_step >= horizon.steps:
            raise FlightTableError(f"line {line_no}: flight {fid} departs outside the horizon")
        if arrive_step <= depart_step:
            raise FlightTableError(
                f"line {line_no}: flight {fid} arrival step <= departure step after snapping"
            )
        a, b = airports[origin], airports[dest]
        dist = great_circle_km((a.latitude, a.longitude), (b.latitude, b.longitude))
        try:
            energy = breguet_energy(dist, params)
        except ValueError as exc:
            raise FlightTableError(f"line {line_no}: flight {fid}: {exc}") from exc
        if energy > params.battery_capacity - params.reserve:
            raise FlightTableError(
                f"line {line_no}: flight {fid} needs {energy:.2f} MWh, exceeds "
                f"capacity minus reserve ({params.battery_capacity - params.reserve:.2f} MWh)"
            )
        flights.append(Flight(fid, origin, dest, depart_step, arrive_step, energy))
    return FlightSet(tuple(flights), horizon)


def _connectable(pred: Flight, succ: Flight, turnaround_steps: int) -> bool:
    return (
        pred.destination == succ.origin
        and pred.arrive_step + turnaround_steps <= succ.depart_step
    )


def assign_fleet(flight_set: FlightSet, turnaround_steps: int = 3) -> list[Rotation]:
    """Chain flights into a minimum-cardinality set of rotations.

    Minimum path cover on the flight-connection DAG: fleet size equals
    |flights| - |maximum bipartite matching|, computed with the augmenting
    path method.  Flight order and successor exploration order are fixed,
    so the output is deterministic.
    """
    for f in flight_set:
        if f.wraps(flight_set.horizon):
            raise FlightTableError(
                f"flight {f.id} wraps the horizon; fleet assignment needs a time-ordered day"
            )
    flights = sorted(flight_set, key=lambda f: (f.depart_step, f.id))
    n = len(flights)
    succs: list[list[int]] = []
    for j, fj in enumerate(flights):
        cand = [i for i, fi in enumerate(flights) if i != j and _connectable(fj, fi, turnaround_steps)]
        cand.sort(key=lambda i: (flights[i].arrive_step, flights[i].id))
        succs.append(cand)

    # matched_pred[i] = index of the flight the aircraft flies immediately before i
    matched_pred: list[int | None] = [None] * n
    matched_next: list[int | None] = [None] * n

    def try_assign(j: int, visited: list[bool]) -> bool:
        for i in succs[j]:
            if visited[i]:
                continue
            visited[i] = True
            if matched_pred[i] is None or try_assign(matched_pred[i], visited):
                matched_pred[i] = j
                matched_next[j] = i
                return True
        return False

    for j in range(n):
        try_assign(j, [False] * n)

    rotations: list[Rotation] = []
    for j in range(n):
        if matched_pred[j] is not None:
            continue
        chain = [j]
        while matched_next[chain[-1]] is not None:
            chain.append(matched_next[chain[-1]])
        rotations.append(
            Rotation(
                aircraft_id=len(rotations),
                flights=tuple(flights[i].id for i in chain),
                home=flights[j].origin,
            )
        )
    return rotations


def _rotation_legs(rotation: Rotation, flight_set: FlightSet) -> list[Flight]:
    return [flight_set.by_id(fid) for fid in rotation.flights]


def validate_rotation(rotation: Rotation, flight_set: FlightSet, turnaround_steps: int) -> None:
    """Check chaining (destination feeds next origin) and turnaround spacing."""
    legs = _rotation_legs(rotation, flight_set)
    n_steps = flight_set.horizon.steps
    for prev, nxt in zip(legs, legs[1:]):
        if prev.destination != nxt.origin:
            raise RotationError(
                f"aircraft {rotation.aircraft_id}: flight {prev.id} lands at "
                f"{prev.destination} but {nxt.id} departs {nxt.origin}"
            )
        if prev.arrive_step + turnaround_steps > nxt.depart_step:
            raise RotationError(
                f"aircraft {rotation.aircraft_id}: turnaround between flights "
                f"{prev.id} and {nxt.id} shorter than {turnaround_steps} steps"
            )
    wrapped = [f for f in legs if f.wraps(flight_set.horizon)]
    if wrapped:
        if len(wrapped) > 1 or wrapped[0] is not legs[-1]:
            raise RotationError(
                f"aircraft {rotation.aircraft_id}: only the last flight may wrap the horizon"
            )
        last, first = legs[-1], legs[0]
        if last.destination != first.origin:
            raise RotationError(
                f"aircraft {rotation.aircraft_id}: wrapped flight {last.id} must land at the "
                f"first departure airport {first.origin}"
            )
        if (last.arrive_step - n_steps) + turnaround_steps > first.depart_step:
            raise RotationError(
                f"aircraft {rotation.aircraft_id}: wrapped flight {last.id} leaves no "
                f"turnaround before flight {first.id}"
            )


def ground_indicator(
    rotations: list[Rotation],
    flight_set: FlightSet,
    airports: dict[str, Airport],
    turnaround_steps: int = 3,
) -> GroundIndicator:
    """Derive the parked-at indicator for every (aircraft, airport, step).

    An aircraft sits at its first origin until the first departure, at each
    flight's destination from arrival until the next departure, and at the
    last destination through the end of the horizon.  During a flight's
    [depart, arrive) interval it is nowhere on the ground.
    """
    n_steps = flight_set.horizon.steps
    airport_ids = tuple(sorted(airports))
    h_index = {code: i for i, code in enumerate(airport_ids)}
    g = np.zeros((len(rotations), len(airport_ids), n_steps), dtype=bool)

    for p, rot in enumerate(rotations):
        legs = _rotation_legs(rot, flight_set)
        if not legs:
            if rot.home is None:
                raise RotationError(f"aircraft {rot.aircraft_id}: no flights and no home airport")
            g[p, h_index[rot.home], :] = True
            continue
        validate_rotation(rot, flight_set, turnaround_steps)
        airborne = np.zeros(n_steps, dtype=bool)
        loc = np.full(n_steps, -1, dtype=int)
        loc[:] = h_index[legs[0].origin]
        for f in legs:
            arr = f.arrive_step
            if arr > n_steps:
                # Wrapped tail: airborne over the day boundary; it lands at the
                # first origin, which the initialization already covers.
                airborne[f.depart_step :] = True
                airborne[: arr - n_steps] = True
            else:
                airborne[f.depart_step : arr] = True
                loc[arr:] = h_index[f.destination]
        for k in range(n_steps):
            if not airborne[k]:
                g[p, loc[k], k] = True
    return GroundIndicator(g, tuple(r.aircraft_id for r in rotations), airport_ids)
