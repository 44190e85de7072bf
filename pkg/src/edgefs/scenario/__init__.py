"""Scenario files, the simulation runner and the consistency checker."""

from .checker import ConsistencyReport, check_consistency, check_visibility_trace, expected_view
from .format import Scenario, ScenarioEvent, ScenarioParseError, parse_scenario
from .generate import random_scenario
from .runner import InvariantViolation, RunResult, ScenarioFailure, Simulation, run

__all__ = [
    "ConsistencyReport",
    "InvariantViolation",
    "RunResult",
    "Scenario",
    "ScenarioEvent",
    "ScenarioFailure",
    "ScenarioParseError",
    "Simulation",
    "check_consistency",
    "check_visibility_trace",
    "expected_view",
    "parse_scenario",
    "random_scenario",
    "run",
]
