"""Solution archives: one directory per converged equilibrium.

Layout::

    config.yaml          model, discretization and solver settings
    value_surface.csv    u and ζ on the open-simplex nodes (or regression coefficients)
    strategy.csv         θ* table (grid) or θ* along the sampled paths (regression)
    paths.csv            first paths of the final forward pass
    summary.json         Y₀, Picard log, flags, revelation profile
    solution.npz         full-precision arrays used by :func:`load_solution`
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Dict, List

import numpy as np

from ..market.config import dump_model, load_model_file
from ..sim.filtering import FilterPath, write_path_dump
from ..sim.simplex import SimplexGrid
from ..sim.strategies import TabulatedStrategy
from ..solvers.bsde import ValueSurface, write_value_surface
from ..solvers.fbsde import EquilibriumSolution, IterationRecord, RegressionStrategy, revelation_profile
from ..solvers.regression import PolynomialBasis, RegressionFit
from .artifacts import read_json, write_csv, write_json

LOGGER = logging.getLogger(__name__)

CONFIG_NAME = "config.yaml"
ARRAYS_NAME = "solution.npz"
SUMMARY_NAME = "summary.json"

__all__ = ["ARRAYS_NAME", "CONFIG_NAME", "SUMMARY_NAME", "load_solution", "save_solution"]

_PATH_FIELDS = ("times", "brownian", "state", "price", "log_weights", "rates")
_FIT_FIELDS = ("exponents", "center", "scale", "active", "coefficients")


def _fit_arrays(prefix: str, fit: RegressionFit) -> Dict[str, np.ndarray]:
    basis = fit.basis
    return {
        f"{prefix}_exponents": basis.exponents,
        f"{prefix}_center": basis.center,
        f"{prefix}_scale": basis.scale,
        f"{prefix}_active": basis.active,
        f"{prefix}_coefficients": fit.coefficients,
        f"{prefix}_cv_rmse": np.asarray(fit.cv_rmse),
    }


def _fit_from_arrays(prefix: str, arrays) -> RegressionFit:
    basis = PolynomialBasis(
        exponents=arrays[f"{prefix}_exponents"],
        center=arrays[f"{prefix}_center"],
        scale=arrays[f"{prefix}_scale"],
        active=arrays[f"{prefix}_active"],
    )
    return RegressionFit(basis=basis, coefficients=arrays[f"{prefix}_coefficients"], cv_rmse=float(arrays[f"{prefix}_cv_rmse"]))


def _strategy_rows(solution: EquilibriumSolution, max_paths: int):
    strategy = solution.strategy
    if isinstance(strategy, TabulatedStrategy):
        grid = strategy.grid
        mask = grid.interior_mask if np.any(grid.interior_mask) else np.ones(grid.num_nodes, dtype=bool)
        for k in range(strategy.num_steps):
            t = float(solution.surface.times[k])
            for node in np.flatnonzero(mask):
                yield [t, *grid.states[node], *strategy.table[k, node]]
        return
    path = solution.path
    for j in range(min(max_paths, path.num_paths)):
        for k in range(path.rates.shape[1]):
            yield [float(path.times[k]), *path.state[j, k], *path.rates[j, k]]


def save_solution(solution: EquilibriumSolution, directory: Path, *, path_sample: int = 20) -> Path:
    """Write the archive for ``solution`` into ``directory`` and return it."""

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    model = solution.model
    n = model.num_types
    (directory / CONFIG_NAME).write_text(dump_model(model, solution.disc, solution.settings), encoding="utf-8")

    write_value_surface(solution.surface, directory / "value_surface.csv")
    header = ["t"] + [f"x_{i + 1}" for i in range(n)] + [f"theta_{i + 1}" for i in range(n)]
    write_csv(directory / "strategy.csv", header, _strategy_rows(solution, path_sample))
    write_path_dump(solution.path, directory / "paths.csv", max_paths=path_sample)

    surface = solution.surface
    arrays: Dict[str, np.ndarray] = {
        "surface_times": surface.times,
        "y0": surface.y0,
        "path_values": solution.path_values,
        "path_z": solution.path_z,
        "path_clip_events": np.asarray(solution.path.clip_events),
        "path_max_sum_defect": np.asarray(solution.path.max_sum_defect),
    }
    for name in _PATH_FIELDS:
        arrays[f"path_{name}"] = getattr(solution.path, name)
    if surface.y0_se is not None:
        arrays["y0_se"] = surface.y0_se
    if surface.is_grid:
        arrays["u"] = surface.u
        arrays["zeta"] = surface.zeta
        arrays["theta"] = solution.strategy.table
    else:
        arrays["num_fits"] = np.asarray(len(surface.fits))
        for k, (value_fit, z_fit) in enumerate(surface.fits):
            arrays.update(_fit_arrays(f"fit{k}_u", value_fit))
            arrays.update(_fit_arrays(f"fit{k}_zeta", z_fit))
    np.savez(directory / ARRAYS_NAME, **arrays)

    summary = solution.summary()
    summary["revelation_profile"] = revelation_profile(solution).tolist()
    summary["values"] = list(model.values)
    summary["prior"] = list(model.prior)
    summary["horizon"] = model.horizon
    summary["num_steps"] = solution.disc.num_steps
    summary["num_paths"] = solution.disc.num_paths
    summary["seed"] = solution.disc.seed
    write_json(directory / SUMMARY_NAME, summary)
    LOGGER.info("Saved %s solution archive to %s", solution.solver, directory)
    return directory


def load_solution(directory: Path) -> EquilibriumSolution:
    """Rebuild an :class:`EquilibriumSolution` from :func:`save_solution` output.

    Regression archives come back with an undamped :class:`RegressionStrategy`
    built from the saved fits.
    """

    directory = Path(directory)
    if not (directory / ARRAYS_NAME).exists():
        raise FileNotFoundError(f"No solution archive in {directory}")
    config = load_model_file(directory / CONFIG_NAME)
    summary = read_json(directory / SUMMARY_NAME)
    model, disc = config.model, config.discretization

    with np.load(directory / ARRAYS_NAME) as stored:
        arrays = {name: stored[name] for name in stored.files}

    path = FilterPath(
        **{name: arrays[f"path_{name}"] for name in _PATH_FIELDS},
        clip_events=int(arrays["path_clip_events"]),
        max_sum_defect=float(arrays["path_max_sum_defect"]),
    )
    history: List[IterationRecord] = [IterationRecord(**record) for record in summary.get("history", [])]

    if summary["solver"] == "grid":
        grid = SimplexGrid(model.num_types, disc.simplex_grid)
        surface = ValueSurface(
            times=arrays["surface_times"],
            y0=arrays["y0"],
            grid=grid,
            u=arrays["u"],
            zeta=arrays["zeta"],
            y0_se=arrays.get("y0_se"),
        )
        strategy = TabulatedStrategy(grid=grid, table=arrays["theta"], bound=model.action_bound)
    else:
        fits = [
            (_fit_from_arrays(f"fit{k}_u", arrays), _fit_from_arrays(f"fit{k}_zeta", arrays))
            for k in range(int(arrays["num_fits"]))
        ]
        surface = ValueSurface(
            times=arrays["surface_times"],
            y0=arrays["y0"],
            fits=fits,
            path_values=arrays["path_values"],
            path_z=arrays["path_z"],
            y0_se=arrays.get("y0_se"),
        )
        strategy = RegressionStrategy(model, surface)

    LOGGER.debug("Loaded %s solution from %s", summary["solver"], directory)
    return EquilibriumSolution(
        model=model,
        disc=disc,
        settings=config.solver,
        solver=summary["solver"],
        surface=surface,
        strategy=strategy,
        path=path,
        path_values=arrays["path_values"],
        path_z=arrays["path_z"],
        history=history,
        converged=bool(summary.get("converged", True)),
    )
