"""Multi-drone coverage-control simulator with stealthy shared teleoperation."""

from .engine import HumanCommand, SimConfig, Telemetry, run
from .field import GridSpec, build_grid, objective
from .geometry import AverageState, DroneState, SwarmState, ViewTarget, average_state
from .presets import PRESETS, get_preset
from .scenario import load_scenario, parse_scenario, save_scenario
from .sensing import CoverageParams, SensingParams

__version__ = "0.1.0"

__all__ = [
    "AverageState",
    "CoverageParams",
    "DroneState",
    "GridSpec",
    "HumanCommand",
    "PRESETS",
    "SensingParams",
    "SimConfig",
    "SwarmState",
    "Telemetry",
    "ViewTarget",
    "average_state",
    "build_grid",
    "get_preset",
    "load_scenario",
    "objective",
    "parse_scenario",
    "run",
    "save_scenario",
    "__version__",
]
