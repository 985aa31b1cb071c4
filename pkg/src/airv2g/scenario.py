"""Scenario container: one full problem instance plus derived artifacts.

A Scenario bundles the network, flight set (or precomputed rotations),
aircraft parameters, price series, per-airport occupancy profiles, and
policy flags.  Derived artifacts (SoC grids, occupancy streams, rotations)
are computed lazily and cached so a scenario solves the same way no matter
which entry point touched it first.
"""

import hashlib
import json
from dataclasses import dataclass, field, replace

from . import evfleet, schedule
from .evfleet import OccupancyProfile, OccupancyStream, SocGrid
from .lpcore import PriceSeries
from .schedule import AircraftParams, Airport, FlightSet, Horizon, Rotation


@dataclass
class Scenario:
    horizon: Horizon
    airports: dict[str, Airport]
    flights: FlightSet
    params: AircraftParams
    prices: PriceSeries
    occupancy: dict[str, OccupancyProfile] = field(default_factory=dict)
    rotations: tuple[Rotation, ...] | None = None
    soc_buckets: int = 10
    charge_efficiency: float = 0.95
    auto_coarsen: bool = True
    allow_grid_export: bool = False
    wrap: bool = False
    turnaround_steps: int = 3
    seed_override: int | None = None
    name: str = "scenario"
    fingerprint: str = ""
    _grids: dict[str, SocGrid] | None = field(default=None, repr=False)
    _streams: dict[str, OccupancyStream] | None = field(default=None, repr=False)

    def charger_airports(self) -> list[str]:
        return sorted(h for h, ap in self.airports.items() if ap.v2g_chargers > 0)

    def effective_buckets(self) -> int:
        """Global SoC bucket count, coarsened to the strictest airport's CFL limit."""
        buckets = self.soc_buckets
        if not self.auto_coarsen:
            return buckets
        for h in self.charger_airports():
            ap = self.airports[h]
            buckets = min(
                buckets,
                evfleet.admissible_buckets(ap.charger_power, ap.ev_capacity, self.horizon.dt_hours),
            )
        return buckets

    def grids(self) -> dict[str, SocGrid]:
        if self._grids is None:
            buckets = self.effective_buckets()
            self._grids = {}
            for h in self.charger_airports():
                ap = self.airports[h]
                self._grids[h] = SocGrid(
                    buckets=buckets,
                    rate=ap.charger_power / ap.ev_capacity,
                    dt=self.horizon.dt_hours,
                )
        return dict(self._grids)

    def streams(self) -> dict[str, OccupancyStream]:
        if self._streams is None:
            grids = self.grids()
            self._streams = {}
            for h in self.charger_airports():
                profile = self.occupancy.get(h)
                if profile is None:
                    self._streams[h] = evfleet.empty_stream(grids[h].buckets, self.horizon.steps)
                    continue
                self._streams[h] = evfleet.synthesize_occupancy(
                    profile,
                    grids[h],
                    self.horizon,
                    capacity=self.airports[h].v2g_chargers,
                    seed=self.seed_override,
                )
        return dict(self._streams)

    def ensure_rotations(self) -> tuple[Rotation, ...]:
        if self.rotations is None:
            self.rotations = tuple(schedule.assign_fleet(self.flights, self.turnaround_steps))
        return self.rotations

    def with_overrides(
        self,
        chargers: int | None = None,
        grid_cap: float | None = None,
        seed: int | None = None,
    ) -> "Scenario":
        """Variant with charger count (at V2G-capable airports), grid caps, or seed replaced.

        The fingerprint is kept: variants of one scenario stay comparable.
        """
        airports = dict(self.airports)
        if chargers is not None:
            for h in self.charger_airports():
                airports[h] = replace(airports[h], v2g_chargers=chargers)
        if grid_cap is not None:
            airports = {h: replace(ap, grid_cap=grid_cap) for h, ap in airports.items()}
        out = replace(
            self,
            airports=airports,
            seed_override=seed if seed is not None else self.seed_override,
            _grids=None,
            _streams=None,
        )
        return out

    def describe_overrides(self) -> dict:
        return {
            "chargers": {h: self.airports[h].v2g_chargers for h in self.charger_airports()},
            "grid_caps": {h: ap.grid_cap for h, ap in sorted(self.airports.items())},
            "seed_override": self.seed_override,
        }


def fingerprint_inputs(*chunks: bytes | str) -> str:
    """Stable content hash of scenario inputs, for refusing cross-scenario compares."""
    digest = hashlib.sha256()
    for chunk in chunks:
        if isinstance(chunk, str):
            chunk = chunk.encode("utf-8")
        digest.update(chunk)
        digest.update(b"\x00")
    return digest.hexdigest()


def fingerprint_scenario(
    config_dict: dict, airports_text: str, flights_text: str, prices_text: str
) -> str:
    canonical = json.dumps(_strip_variant_keys(config_dict), sort_keys=True, default=str)
    return fingerprint_inputs(canonical, airports_text, flights_text, prices_text)


def _strip_variant_keys(config: dict) -> dict:
    """Drop knobs that sweep runs override, so variants share a fingerprint."""
    out = {k: v for k, v in config.items() if k not in ("name",)}
    return out
