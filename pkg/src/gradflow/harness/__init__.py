"""Configuration, experiment orchestration, plots and the command line."""

from .config import KINDS, ConfigError, ExperimentConfig, load_config, loads_config, parse_value
from .experiments import criterion, run_batch, run_experiment, worker_cap
from .smooth import (ENERGIES, GradientCheckError, LineTalweg, SmoothEnergy, StabilityReport,
                     make_energy, smooth_line_talweg, stability_probe)

__all__ = ["KINDS", "ConfigError", "ExperimentConfig", "load_config", "loads_config",
           "parse_value", "criterion", "run_batch", "run_experiment", "worker_cap", "ENERGIES",
           "GradientCheckError", "LineTalweg", "SmoothEnergy", "StabilityReport", "make_energy",
           "smooth_line_talweg", "stability_probe"]
