"""Generators, file formats, experiments and the command line."""

from .experiments import KINDS, Experiment, Report, experiment_from_config, fit_slope, run_experiment
from .generators import POINT_SPECS, RANGE_SPECS, generate_points, generate_ranges
from .io import read_config, read_points_csv, read_ranges, write_json, write_points_csv, write_ranges

__all__ = [
    "KINDS",
    "Experiment",
    "Report",
    "experiment_from_config",
    "fit_slope",
    "run_experiment",
    "POINT_SPECS",
    "RANGE_SPECS",
    "generate_points",
    "generate_ranges",
    "read_config",
    "read_points_csv",
    "read_ranges",
    "write_json",
    "write_points_csv",
    "write_ranges",
]
