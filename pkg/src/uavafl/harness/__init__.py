"""Benchmark strategies, experiment orchestration and reporting."""

from uavafl.harness.config import ExperimentConfig, load_config, parse_config, trial_seeds
from uavafl.harness.experiment import TrialResult, run_experiment, run_trial, simulate_plan
from uavafl.harness.report import ExperimentReport, write_report
from uavafl.harness.strategies import KINDS, Plan, make_plans

__all__ = [
    "ExperimentConfig",
    "ExperimentReport",
    "KINDS",
    "Plan",
    "TrialResult",
    "load_config",
    "make_plans",
    "parse_config",
    "run_experiment",
    "run_trial",
    "simulate_plan",
    "trial_seeds",
    "write_report",
]
