"""Brownian paths, the simplex lattice, feedback strategies and the filter."""

from .filtering import FilterPath, filter_exact, filter_sde, write_path_dump
from .paths import PathBundle, gen_paths, girsanov_weight, log_girsanov_weights, path_generator
from .simplex import EPS_CLIP, SimplexGrid, project_to_simplex, truncate_to_simplex
from .strategies import ConstantStrategy, FeedbackStrategy, OpenLoopStrategy, ShiftedStrategy, TabulatedStrategy

__all__ = [
    "EPS_CLIP",
    "ConstantStrategy",
    "FeedbackStrategy",
    "FilterPath",
    "OpenLoopStrategy",
    "PathBundle",
    "ShiftedStrategy",
    "SimplexGrid",
    "TabulatedStrategy",
    "filter_exact",
    "filter_sde",
    "gen_paths",
    "girsanov_weight",
    "log_girsanov_weights",
    "path_generator",
    "project_to_simplex",
    "truncate_to_simplex",
    "write_path_dump",
]
