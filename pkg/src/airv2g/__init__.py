"""Grid-cost-optimal charge scheduling for electric aircraft with landside V2G buffering."""

from .evfleet import (
    FleetControls,
    FleetState,
    OccupancyProfile,
    OccupancyStream,
    SocGrid,
    build_vout_ref,
    fleet_power,
    simulate_forward,
    step_dynamics,
    synthesize_occupancy,
    validate_cfl,
)
from .lpcore import (
    LpModel,
    PriceSeries,
    SolutionReport,
    VarIndex,
    build_problem,
    extract_solution,
    read_mps,
    residuals,
    write_mps,
)
from .scenario import Scenario
from .schedule import (
    AircraftParams,
    Airport,
    Flight,
    FlightSet,
    GroundIndicator,
    Horizon,
    Rotation,
    assign_fleet,
    breguet_energy,
    great_circle_km,
    ground_indicator,
    parse_airport_table,
    parse_flight_table,
)
from .solver import SolveOutcome, SolverConfig, reference_solve, solve, verify

__version__ = "0.1.0"
