"""Backward solvers and the Picard equilibrium loop."""

from .bsde import (
    InnerFixedPointError,
    ValueSurface,
    bsde_solve_grid,
    bsde_solve_regress,
    constant_price_map,
    filter_price_map,
    value_of_strategy,
    write_value_surface,
)
from .fbsde import (
    EquilibriumSolution,
    PicardDivergenceError,
    extract_strategy,
    picard_diagnostics,
    revelation_profile,
    solve_fbsde,
    sweep_horizon,
    uniqueness_probe,
)

__all__ = [
    "EquilibriumSolution",
    "InnerFixedPointError",
    "PicardDivergenceError",
    "ValueSurface",
    "bsde_solve_grid",
    "bsde_solve_regress",
    "constant_price_map",
    "extract_strategy",
    "filter_price_map",
    "picard_diagnostics",
    "revelation_profile",
    "solve_fbsde",
    "sweep_horizon",
    "uniqueness_probe",
    "value_of_strategy",
    "write_value_surface",
]
