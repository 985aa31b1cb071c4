import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from airv2g import lpcore, schedule, solver
from airv2g.evfleet import OccupancyProfile
from airv2g.lpcore import PriceSeries
from airv2g.scenario import Scenario
from airv2g.schedule import AircraftParams, Airport, Flight, FlightSet, Horizon

DATA = Path(__file__).resolve().parent.parent / "data"

TOY_NIGHT = [30.0] * 7
TOY_DAY = [120.0] * 13
TOY_LATE = [25.0] * 4


def toy_scenario(chargers=10, grid_cap=8.0, *, buckets=4, price_scale=1.0, occupied=True):
    """2 airports, 1 aircraft, 2 flights, 10 V2G chargers at AAA, N = 24 at 1 h.

    Small enough for the dense reference solver, rich enough to exercise every
    constraint family.
    """
    hz = Horizon(steps=24, dt_hours=1.0)
    params = AircraftParams()
    airports = {
        "AAA": Airport("AAA", 52.308, 4.764, grid_cap=grid_cap, price_zone="Z1",
                       v2g_chargers=chargers, charger_power=11.0, ev_capacity=60.0),
        "BBB": Airport("BBB", 48.85, 2.35, grid_cap=grid_cap, price_zone="Z2",
                       v2g_chargers=0, charger_power=11.0, ev_capacity=60.0),
    }
    dist = schedule.great_circle_km((52.308, 4.764), (48.85, 2.35))
    energy = schedule.breguet_energy(dist, params)
    flights = FlightSet(
        (Flight(1, "AAA", "BBB", 6, 8, energy), Flight(2, "BBB", "AAA", 14, 16, energy)), hz
    )
    z1 = price_scale * np.array(TOY_NIGHT + TOY_DAY + TOY_LATE)
    prices = PriceSeries({"Z1": z1.copy(), "Z2": z1 + 15.0 * price_scale}, 24)
    occupancy = {}
    if occupied and chargers > 0:
        occupancy["AAA"] = OccupancyProfile(
            arrivals_per_hour=tuple([0] * 5 + [1, 1, 1, 1] + [0] * 15),
            departures_per_hour=tuple([0] * 17 + [1, 1, 1, 1] + [0] * 3),
            initial_count=5,
            seed=42,
        )
    return Scenario(
        horizon=hz,
        airports=airports,
        flights=flights,
        params=params,
        prices=prices,
        occupancy=occupancy,
        soc_buckets=buckets,
        name="toy",
        fingerprint="toy-fixture",
    )


def toy8_scenario():
    """1 aircraft, 8 hourly steps, one flight needing exactly two full-power hours."""
    hz = Horizon(steps=8, dt_hours=1.0)
    params = AircraftParams(max_charge_power=2.0)
    airports = {
        "AAA": Airport("AAA", 52.308, 4.764, grid_cap=10.0, price_zone="ZA", v2g_chargers=0),
        "BBB": Airport("BBB", 50.0, 8.6, grid_cap=10.0, price_zone="ZB", v2g_chargers=0),
    }
    flights = FlightSet((Flight(1, "AAA", "BBB", 3, 5, 4.0),), hz)
    prices = PriceSeries(
        {
            "ZA": np.array([50.0, 20.0, 60.0, 99.0, 99.0, 35.0, 10.0, 45.0]),
            "ZB": np.array([50.0, 20.0, 60.0, 99.0, 99.0, 35.0, 10.0, 45.0]),
        },
        8,
    )
    return Scenario(
        horizon=hz,
        airports=airports,
        flights=flights,
        params=params,
        prices=prices,
        name="toy8",
        fingerprint="toy8-fixture",
    )


def solve_scenario(scenario, backend="external"):
    model = lpcore.build_problem(scenario)
    outcome = solver.solve(model, solver.SolverConfig(backend=backend))
    return model, outcome


@pytest.fixture(scope="session")
def toy_solved():
    model, outcome = solve_scenario(toy_scenario())
    assert outcome.status == solver.OPTIMAL
    return model, outcome


@pytest.fixture(scope="session")
def hub_scenario():
    from airv2g import cli

    return cli.load_scenario(DATA / "hub" / "scenario_day1.toml")


@pytest.fixture(scope="session")
def hub_solved(hub_scenario):
    model, outcome = solve_scenario(hub_scenario)
    assert outcome.status == solver.OPTIMAL
    return model, outcome
