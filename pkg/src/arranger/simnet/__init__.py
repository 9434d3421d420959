from .checkers import ARRANGER_PROPERTIES, CHECKERS, check, check_all
from .network import Network, Schedule
from .runner import RunResult, World, run
from .scenario import FaultPlan, Scenario, ScenarioInvalid, Timing, Workload, load, loads

__all__ = [
    "ARRANGER_PROPERTIES",
    "CHECKERS",
    "FaultPlan",
    "Network",
    "RunResult",
    "Scenario",
    "ScenarioInvalid",
    "Schedule",
    "Timing",
    "Workload",
    "World",
    "check",
    "check_all",
    "load",
    "loads",
    "run",
]
