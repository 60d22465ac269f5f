from .driver import HeightRecord, Simulation, SimulationResult, run_scenario
from .report import write_report
from .scenario import Scenario, apply_overrides, load_scenario, parse_scenario_text

__all__ = [
    "HeightRecord",
    "Simulation",
    "SimulationResult",
    "run_scenario",
    "write_report",
    "Scenario",
    "apply_overrides",
    "load_scenario",
    "parse_scenario_text",
]
