"""Scenario configuration, pipelines, reports and the command line."""

from .config import ConfigError, Scenario, load_scenario, scenario_from_text
from .pipeline import (
    EXIT_CONFIG,
    EXIT_INFEASIBLE,
    EXIT_NUMERICAL,
    EXIT_OK,
    estimate_observability_constant,
    run_certify,
    run_verify,
)
from .report import VerificationReport, emit_report

__all__ = [
    "ConfigError", "EXIT_CONFIG", "EXIT_INFEASIBLE", "EXIT_NUMERICAL", "EXIT_OK", "Scenario", "VerificationReport",
    "emit_report", "estimate_observability_constant", "load_scenario", "run_certify", "run_verify", "scenario_from_text",
]
