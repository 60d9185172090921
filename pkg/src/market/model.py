"""Domain types for the discrete-value Kyle-Back market."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Literal, Optional, Tuple

import numpy as np

LOGGER = logging.getLogger(__name__)

CostVariant = Literal["sqrt_closed_form", "quadratic", "tabulated"]
SchemeVariant = Literal["semi_implicit", "explicit"]

PRIOR_TOLERANCE = 1e-12

__all__ = [
    "CostSpec",
    "CostVariant",
    "Discretization",
    "MarketModel",
    "PRIOR_TOLERANCE",
    "SolverSettings",
    "normalize_prior",
]


@dataclass(frozen=True)
class CostSpec:
    """Trading cost ``f(θ)`` and the action interval ``[-a, a]`` it lives on.

    ``growth_constant`` is the ``C`` in ``f(θ) >= f(0) - C|θ|``; it is computed on
    construction so every model carries a finite recorded value.
    """

    variant: CostVariant = "sqrt_closed_form"
    action_bound: float = 1.0
    lam: Optional[float] = None
    table_theta: Tuple[float, ...] = ()
    table_cost: Tuple[float, ...] = ()
    growth_constant: float = field(default=0.0, compare=False)

    def __post_init__(self) -> None:
        if self.variant == "sqrt_closed_form":
            if self.action_bound != 1.0:
                raise ValueError("sqrt_closed_form cost is defined on [-1, 1]; action_bound must be 1")
        elif self.variant == "quadratic":
            if self.lam is None or not self.lam > 0.0:
                raise ValueError(f"quadratic cost needs lam > 0, got {self.lam!r}")
        elif self.variant == "tabulated":
            if len(self.table_theta) != len(self.table_cost):
                raise ValueError("tabulated cost needs theta and f tables of equal length")
            if len(self.table_theta) < 3:
                raise ValueError("tabulated cost needs at least 3 grid points")
            theta = np.asarray(self.table_theta, dtype=float)
            if np.any(np.diff(theta) <= 0.0):
                raise ValueError("tabulated theta grid must be strictly increasing")
            a = self.action_bound
            if not (math.isclose(theta[0], -a, abs_tol=1e-12) and math.isclose(theta[-1], a, abs_tol=1e-12)):
                raise ValueError(f"tabulated theta grid must span the action interval [-{a}, {a}]")
        else:
            raise ValueError(f"Unknown cost variant: {self.variant!r}")
        if not (self.action_bound > 0.0 and math.isfinite(self.action_bound)):
            raise ValueError(f"action_bound must be a positive finite real, got {self.action_bound!r}")
        object.__setattr__(self, "growth_constant", self._compute_growth_constant())

    def _compute_growth_constant(self) -> float:
        if self.variant != "tabulated":
            # f(θ) >= f(0) holds for both closed forms.
            return 0.0
        theta = np.asarray(self.table_theta, dtype=float)
        cost = np.asarray(self.table_cost, dtype=float)
        f0 = float(np.interp(0.0, theta, cost))
        nonzero = np.abs(theta) > 0.0
        slopes = (f0 - cost[nonzero]) / np.abs(theta[nonzero])
        return float(max(0.0, slopes.max(initial=0.0)))


@dataclass(frozen=True)
class MarketModel:
    """Discrete asset-value support ``v``, prior ``p``, horizon ``T`` and cost."""

    values: Tuple[float, ...]
    prior: Tuple[float, ...]
    horizon: float
    cost: CostSpec = field(default_factory=CostSpec)

    def __post_init__(self) -> None:
        if len(self.values) == 0:
            raise ValueError("N must be at least 1")
        if len(self.values) != len(self.prior):
            raise ValueError(f"v has {len(self.values)} entries but p has {len(self.prior)}")
        if len(set(self.values)) != len(self.values):
            raise ValueError("duplicate values in v")
        if any(not p > 0.0 for p in self.prior):
            raise ValueError("every prior weight must be positive")
        if abs(math.fsum(self.prior) - 1.0) > 1e-15:
            raise ValueError("prior must sum to 1; normalize it with normalize_prior first")
        if not (self.horizon > 0.0 and math.isfinite(self.horizon)):
            raise ValueError(f"T must be a positive finite real, got {self.horizon!r}")

    @property
    def num_types(self) -> int:
        return len(self.values)

    @property
    def v(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    @property
    def p(self) -> np.ndarray:
        return np.asarray(self.prior, dtype=float)

    @property
    def action_bound(self) -> float:
        return self.cost.action_bound

    @property
    def mean_value(self) -> float:
        return float(np.dot(self.p, self.v))

    def with_horizon(self, horizon: float) -> "MarketModel":
        return MarketModel(values=self.values, prior=self.prior, horizon=horizon, cost=self.cost)


@dataclass(frozen=True)
class Discretization:
    """Time, path and grid resolution shared by every solver."""

    num_steps: int = 64
    num_paths: int = 10_000
    simplex_grid: int = 201
    seed: int = 42
    basis_degree: int = 3

    def __post_init__(self) -> None:
        if self.num_steps < 1:
            raise ValueError("num_steps must be >= 1")
        if self.num_paths < 1:
            raise ValueError("num_paths must be >= 1")
        if self.simplex_grid < 2:
            raise ValueError("simplex_grid must be >= 2")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")
        if self.basis_degree < 1:
            raise ValueError("basis_degree must be >= 1")

    def dt(self, horizon: float) -> float:
        return horizon / self.num_steps

    def times(self, horizon: float) -> np.ndarray:
        return np.linspace(0.0, horizon, self.num_steps + 1)

    def replace(self, **changes) -> "Discretization":
        data = {
            "num_steps": self.num_steps,
            "num_paths": self.num_paths,
            "simplex_grid": self.simplex_grid,
            "seed": self.seed,
            "basis_degree": self.basis_degree,
        }
        data.update(changes)
        return Discretization(**data)


@dataclass(frozen=True)
class SolverSettings:
    """Tolerances for the Picard loop and the per-node fixed point."""

    picard_tol: float = 1e-8
    picard_max_iter: int = 60
    damping: float = 0.0
    inner_tol: float = 1e-10
    inner_max_iter: int = 200
    inner_damping: float = 0.5
    scheme: SchemeVariant = "semi_implicit"

    def __post_init__(self) -> None:
        if not self.picard_tol > 0.0:
            raise ValueError("picard_tol must be positive")
        if self.picard_max_iter < 1:
            raise ValueError("picard_max_iter must be >= 1")
        if not 0.0 <= self.damping < 1.0:
            raise ValueError("damping must lie in [0, 1)")
        if not 0.0 < self.inner_damping <= 1.0:
            raise ValueError("inner_damping must lie in (0, 1]")
        if self.scheme not in ("semi_implicit", "explicit"):
            raise ValueError(f"Unknown scheme: {self.scheme!r}")


def normalize_prior(prior: Tuple[float, ...] | list[float]) -> Tuple[float, ...]:
    """Rescale ``prior`` so its weights sum to one.

    The largest weight absorbs the rounding residue so that ``math.fsum`` of the
    result is exactly one.
    """

    weights = np.asarray(prior, dtype=float)
    total = math.fsum(weights)
    if abs(total - 1.0) > PRIOR_TOLERANCE:
        LOGGER.warning("Prior sums to %.17g; renormalizing", total)
    weights = weights / total
    largest = int(np.argmax(weights))
    rest = math.fsum(np.delete(weights, largest))
    weights[largest] = 1.0 - rest
    return tuple(float(w) for w in weights)
