"""Case files, runners, output writers and the command line."""

from .cases import CaseError, SteadyStateError, convergence_study, projection_study, run_case
from .config import CaseConfig, ConfigError, build_config, load_config
from .io import read_csv_profile, read_vtk, write_csv_profile, write_vtk

__all__ = [
    "CaseConfig",
    "CaseError",
    "ConfigError",
    "SteadyStateError",
    "build_config",
    "convergence_study",
    "load_config",
    "projection_study",
    "read_csv_profile",
    "read_vtk",
    "run_case",
    "write_csv_profile",
    "write_vtk",
]
