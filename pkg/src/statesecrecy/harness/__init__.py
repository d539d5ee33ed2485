"""Scenario files, Monte-Carlo runner, secrecy verification, CSV output and CLI."""

from .report import SecrecyReport, verify_secrecy
from .runner import MonteCarloResult, TrialRecord, run_monte_carlo, run_trial, trial_seed
from .scenario import Scenario, load_scenario, example_scenario, save_scenario

__all__ = [
    "MonteCarloResult",
    "Scenario",
    "SecrecyReport",
    "TrialRecord",
    "load_scenario",
    "example_scenario",
    "run_monte_carlo",
    "run_trial",
    "save_scenario",
    "trial_seed",
    "verify_secrecy",
]
