"""Benchmark harness: scenario files, runs, suites and plot data."""

from .runner import RunRecord, emit_plotdata, run_scenario, run_suite, summarize
from .scenario import Scenario, ScenarioError, bundled_dir, load_scenario, parse_scenario

__all__ = [
    "RunRecord",
    "Scenario",
    "ScenarioError",
    "bundled_dir",
    "emit_plotdata",
    "load_scenario",
    "parse_scenario",
    "run_scenario",
    "run_suite",
    "summarize",
]
