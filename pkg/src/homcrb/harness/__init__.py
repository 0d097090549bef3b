"""Experiment runner: configs, Monte-Carlo campaigns, CSV reports."""

from .config import ExperimentConfig, load_config
from .experiments import (
    MonteCarloReport,
    run_crb_report,
    run_landmark_experiment,
    run_network_experiment,
    run_spd_experiment,
)
from .properties import PropertySuiteReport, run_property_suite

__all__ = [
    "ExperimentConfig",
    "MonteCarloReport",
    "PropertySuiteReport",
    "load_config",
    "run_crb_report",
    "run_landmark_experiment",
    "run_network_experiment",
    "run_property_suite",
    "run_spd_experiment",
]
