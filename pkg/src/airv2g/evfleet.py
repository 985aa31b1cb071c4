"""Aggregated landside EV fleet: SoC-bucket transport dynamics and occupancy synthesis.

The parked fleet at an airport is modeled as vehicle counts per SoC bucket in
three modes (charging, idle, discharging).  Charging advects counts toward
higher buckets and discharging toward lower ones, one explicit Euler step at
a time with an upwind stencil; the scheme is stable iff the CFL number
nu = p*dt/dxi stays in (0, 1].  Counts are real-valued: the fleet is an
aggregate, not individual cars.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .schedule import Airport, Horizon


class CflError(ValueError):
    """SoC discretization violates the upwind stability bound."""


class OccupancyError(ValueError):
    """Occupancy profile cannot be realized (e.g. departures without parked cars)."""


class InfeasibleControlError(ValueError):
    """Controls drive some vehicle count negative."""


@dataclass(frozen=True)
class SocGrid:
    """SoC discretization: `buckets` intervals of width 1/buckets.

    `rate` is the per-hour SoC gain of a charging vehicle, P_ch/E_EV.
    Bucket b (0-based) covers the SoC interval (b*dxi, (b+1)*dxi].
    """

    buckets: int
    rate: float  # 1/h
    dt: float  # h

    def __post_init__(self):
        if self.buckets < 2:
            raise ValueError("need at least 2 SoC buckets")
        if self.rate <= 0 or self.dt <= 0:
            raise ValueError("rate and dt must be positive")

    @property
    def delta_xi(self) -> float:
        return 1.0 / self.buckets

    @property
    def nu(self) -> float:
        return self.rate * self.dt / self.delta_xi


def validate_cfl(grid: SocGrid) -> float:
    """Return the CFL number nu = p*dt/dxi, raising if outside (0, 1]."""
    nu = grid.nu
    if nu > 1.0 + 1e-12:
        raise CflError(
            f"CFL number nu = {nu:.4f} > 1 (rate {grid.rate:.4f}/h, dt {grid.dt} h, "
            f"dxi {grid.delta_xi}); coarsen the SoC grid or shorten the step"
        )
    if nu <= 0:
        raise CflError(f"CFL number nu = {nu:.4f} must be positive")
    return nu


def admissible_buckets(charger_kw: float, ev_kwh: float, dt: float) -> int:
    """Largest bucket count satisfying the CFL bound for this charger hardware."""
    rate = charger_kw / ev_kwh
    return max(2, math.floor(1.0 / (rate * dt) + 1e-9))


def make_grid(
    charger_kw: float,
    ev_kwh: float,
    dt: float,
    requested_buckets: int = 10,
    auto_coarsen: bool = True,
) -> SocGrid:
    """Build a SocGrid, coarsening the bucket count to meet the CFL bound if allowed."""
    rate = charger_kw / ev_kwh
    buckets = requested_buckets
    limit = admissible_buckets(charger_kw, ev_kwh, dt)
    if buckets > limit:
        if not auto_coarsen:
            return SocGrid(buckets, rate, dt)  # caller's validate_cfl will reject
        warnings.warn(
            f"coarsening SoC grid from {buckets} to {limit} buckets to satisfy CFL "
            f"(rate {rate:.4f}/h at dt {dt} h)",
            stacklevel=2,
        )
        buckets = limit
    return SocGrid(buckets, rate, dt)


@dataclass
class FleetState:
    """Trajectories of vehicle counts, arrays of shape (buckets, steps+1)."""

    x_c: np.ndarray
    x_i: np.ndarray
    x_d: np.ndarray

    def total(self, k: int) -> float:
        return float(self.x_c[:, k].sum() + self.x_i[:, k].sum() + self.x_d[:, k].sum())


@dataclass(frozen=True)
class FleetControls:
    """Mode-transfer decisions, arrays of shape (buckets, steps).

    u_c and u_d are signed: negative values return vehicles to idle.
    v_out counts vehicles leaving the lot per bucket.
    """

    u_c: np.ndarray
    u_d: np.ndarray
    v_out: np.ndarray


@dataclass(frozen=True)
class OccupancyStream:
    """Exogenous lot occupancy: arrivals, departure totals, and SoC obligations.

    `initial_idle` holds the vehicles already parked (idle) at step 0.
    `v_out_ref[b, k]` is the number of vehicles leaving at step k whose agreed
    SoC exceeds the lower edge of bucket b; it is non-increasing in b and its
    bucket-0 row equals `departures_total`.
    """

    v_in: np.ndarray  # (buckets, steps)
    departures_total: np.ndarray  # (steps,)
    v_out_ref: np.ndarray  # (buckets, steps)
    initial_idle: np.ndarray  # (buckets,)

    @property
    def buckets(self) -> int:
        return self.v_in.shape[0]

    @property
    def steps(self) -> int:
        return self.v_in.shape[1]


def empty_stream(buckets: int, steps: int) -> OccupancyStream:
    return OccupancyStream(
        v_in=np.zeros((buckets, steps)),
        departures_total=np.zeros(steps),
        v_out_ref=np.zeros((buckets, steps)),
        initial_idle=np.zeros(buckets),
    )


def step_dynamics(
    x_c: np.ndarray,
    x_i: np.ndarray,
    x_d: np.ndarray,
    u_c: np.ndarray,
    u_d: np.ndarray,
    v_in: np.ndarray,
    v_out: np.ndarray,
    grid: SocGrid,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Advance the bucket counts one step.

    Charging counts advect up one bucket at rate nu, discharging counts down;
    mass advected past the top bucket saturates into idle at the top, mass
    past the bottom bucket into idle at the bottom, so the total vehicle
    count changes only by v_in - v_out.
    """
    nu = validate_cfl(grid)
    shift_up = np.zeros_like(x_c)
    shift_up[1:] = x_c[:-1]
    shift_down = np.zeros_like(x_d)
    shift_down[:-1] = x_d[1:]

    nxt_c = (1.0 - nu) * x_c + nu * shift_up + u_c
    nxt_d = (1.0 - nu) * x_d + nu * shift_down + u_d
    nxt_i = x_i + v_in - v_out - u_c - u_d
    nxt_i[-1] += nu * x_c[-1]  # fully charged vehicles park as idle
    nxt_i[0] += nu * x_d[0]  # fully discharged vehicles park as idle

    worst = min(nxt_c.min(), nxt_i.min(), nxt_d.min())
    if worst < -1e-9:
        raise InfeasibleControlError(f"controls drive a vehicle count to {worst:.3e}")
    return np.maximum(nxt_c, 0.0), np.maximum(nxt_i, 0.0), np.maximum(nxt_d, 0.0)


def simulate_forward(
    initial: tuple[np.ndarray, np.ndarray, np.ndarray],
    controls: FleetControls,
    stream: OccupancyStream,
    grid: SocGrid,
) -> FleetState:
    """Replay the discretized dynamics over the horizon covered by `controls`."""
    steps = controls.u_c.shape[1]
    buckets = grid.buckets
    state = FleetState(
        x_c=np.zeros((buckets, steps + 1)),
        x_i=np.zeros((buckets, steps + 1)),
        x_d=np.zeros((buckets, steps + 1)),
    )
    state.x_c[:, 0], state.x_i[:, 0], state.x_d[:, 0] = initial
    for k in range(steps):
        state.x_c[:, k + 1], state.x_i[:, k + 1], state.x_d[:, k + 1] = step_dynamics(
            state.x_c[:, k],
            state.x_i[:, k],
            state.x_d[:, k],
            controls.u_c[:, k],
            controls.u_d[:, k],
            stream.v_in[:, k],
            controls.v_out[:, k],
            grid,
        )
    return state


def fleet_power(x_c: np.ndarray, x_d: np.ndarray, airport: Airport, eta: float = 0.95) -> float:
    """Net lot power in MW: P_ch * sum(x_c/eta - eta*x_d), positive when charging."""
    if not 0 < eta <= 1:
        raise ValueError("charging efficiency must lie in (0, 1]")
    kw = airport.charger_power * (float(x_c.sum()) / eta - eta * float(x_d.sum()))
    return kw / 1000.0


def build_vout_ref(requirements_by_step: list[list[float]], grid: SocGrid) -> np.ndarray:
    """Cumulative departure-SoC reference from per-vehicle minimum SoC values.

    Entry (b, k) counts vehicles leaving at step k that need SoC strictly above
    bucket b's lower edge; a requirement sitting exactly on a bucket's upper
    edge is satisfiable from that bucket.
    """
    buckets = grid.buckets
    steps = len(requirements_by_step)
    ref = np.zeros((buckets, steps))
    for k, reqs in enumerate(requirements_by_step):
        for r in reqs:
            # counted for every bucket whose lower edge lies strictly below r
            top = min(buckets, math.ceil(r / grid.delta_xi - 1e-12))
            ref[:top, k] += 1.0
    return ref


@dataclass(frozen=True)
class OccupancyProfile:
    """Per-airport synthetic lot profile: hourly arrival/departure counts and SoC rules."""

    arrivals_per_hour: tuple[int, ...]
    departures_per_hour: tuple[int, ...]
    initial_count: int = 0
    seed: int = 0
    arrival_soc_max: float = 0.5
    depart_soc_min: float = 0.67
    min_dwell_hours: float | None = None  # None: full SoC sweep time


def synthesize_occupancy(
    profile: OccupancyProfile,
    grid: SocGrid,
    horizon: Horizon,
    capacity: int,
    seed: int | None = None,
) -> OccupancyStream:
    """Generate a deterministic occupancy stream from an hourly profile.

    Arriving vehicles carry a SoC drawn uniformly over the buckets whose upper
    edge stays at or below `arrival_soc_max`; vehicles already parked at step 0
    are spread uniformly over all buckets.  Departures are matched FIFO against
    parked vehicles that have dwelled at least the minimum time (default: the
    time a full bottom-to-top charge takes, so every agreed SoC is reachable);
    each managed departure gets a required SoC drawn uniformly from
    (depart_soc_min, 1].  Vehicles arriving once every charger is taken still
    park and leave with the profile but stay outside the managed fleet; a
    departure with no parked vehicle at all is a profile inconsistency.
    """
    if len(profile.arrivals_per_hour) != horizon.day_hours or len(
        profile.departures_per_hour
    ) != horizon.day_hours:
        raise OccupancyError(
            f"profile must list {horizon.day_hours} hourly counts, got "
            f"{len(profile.arrivals_per_hour)}/{len(profile.departures_per_hour)}"
        )
    rng = np.random.default_rng(profile.seed if seed is None else seed)
    steps = horizon.steps
    buckets = grid.buckets
    steps_per_hour = max(1, round(1.0 / horizon.dt_hours))
    nu = validate_cfl(grid)
    if profile.min_dwell_hours is None:
        min_dwell = math.ceil(buckets / nu)
    else:
        min_dwell = math.ceil(profile.min_dwell_hours / horizon.dt_hours)

    top_arrival = max(1, math.floor(profile.arrival_soc_max / grid.delta_xi + 1e-9))

    arrivals: list[tuple[int, int]] = []  # (step, bucket)
    for hour, count in enumerate(profile.arrivals_per_hour):
        base = hour * steps_per_hour
        for _ in range(int(count)):
            k = int(rng.integers(base, min(base + steps_per_hour, steps)))
            b = int(rng.integers(0, top_arrival))
            arrivals.append((k, b))
    arrivals.sort(key=lambda e: e[0])

    departures: list[int] = []
    for hour, count in enumerate(profile.departures_per_hour):
        base = hour * steps_per_hour
        for _ in range(int(count)):
            departures.append(int(rng.integers(base, min(base + steps_per_hour, steps))))
    departures.sort()

    # Cars take a charger only while one is free; the rest still park and
    # leave with the profile, outside the managed fleet.  When a managed car
    # departs, the longest-parked unplugged car takes over its charger, so
    # the managed fleet never shrinks while the garage holds cars.  Each
    # car: [eligible step, on a charger, departed, SoC bucket].
    initial_idle = np.zeros(buckets)
    cars: list[list] = []
    managed = 0
    for _ in range(int(profile.initial_count)):
        b = int(rng.integers(0, buckets))
        on_charger = managed < capacity
        if on_charger:
            initial_idle[b] += 1.0
            managed += 1
        cars.append([min_dwell, on_charger, False, b])

    v_in = np.zeros((buckets, steps))
    departures_total = np.zeros(steps)
    requirements: list[list[float]] = [[] for _ in range(steps)]
    ai = di = 0
    for k in range(steps):
        while ai < len(arrivals) and arrivals[ai][0] == k:
            _, b = arrivals[ai]
            ai += 1
            on_charger = managed < capacity
            if on_charger:
                v_in[b, k] += 1.0
                managed += 1
            cars.append([k + min_dwell, on_charger, False, b])
        while di < len(departures) and departures[di] == k:
            di += 1
            car = next((c for c in cars if not c[2] and c[0] <= k), None)
            if car is None:
                raise OccupancyError(
                    f"departure demanded at step {k} but no parked vehicle is eligible"
                )
            car[2] = True
            if car[1]:
                managed -= 1
                departures_total[k] += 1.0
                requirements[k].append(float(rng.uniform(profile.depart_soc_min, 1.0)))
                takeover = next((c for c in cars if not c[2] and not c[1]), None)
                if takeover is not None:
                    takeover[1] = True
                    takeover[0] = max(takeover[0], k + min_dwell)  # dwell restarts plugged
                    v_in[takeover[3], k] += 1.0
                    managed += 1

    return OccupancyStream(
        v_in=v_in,
        departures_total=departures_total,
        v_out_ref=build_vout_ref(requirements, grid),
        initial_idle=initial_idle,
    )


def write_stream_csv(stream: OccupancyStream, path) -> None:
    """Export a stream as `step,bucket,v_in,v_out_ref` rows (1-based buckets)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("step,bucket,v_in,v_out_ref\n")
        for k in range(stream.steps):
            for b in range(stream.buckets):
                fh.write(f"{k},{b + 1},{stream.v_in[b, k]:.10g},{stream.v_out_ref[b, k]:.10g}\n")
