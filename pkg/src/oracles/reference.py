"""Brute-force and closed-form reference values for the test suite.

Nothing here imports the production Hamiltonian, filters or solvers; every value
is recomputed from the definitions with plain loops, dense grids and scipy.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, Literal, Optional, Tuple

import numpy as np
from scipy import optimize

from ..market.model import CostSpec, MarketModel

LOGGER = logging.getLogger(__name__)

GRID_POINTS = 100_000
FIXED_POINT_TOL = 1e-12
FIXED_POINT_MAX_ITER = 10_000
MAX_ONESTEP_TYPES = 4

Method = Literal["closed_form", "grid_sup", "binomial_fixed_point", "quadrature"]

__all__ = [
    "FixedPointOracleError",
    "OracleResult",
    "cost_closure",
    "oracle_bridge_moments",
    "oracle_hamiltonian",
    "oracle_onestep_equilibrium",
]


class FixedPointOracleError(RuntimeError):
    """The one-step fixed point did not settle within the iteration cap."""


@dataclass(frozen=True)
class OracleResult:
    name: str
    inputs: Dict[str, object]
    values: Dict[str, object]
    method: Method

    def __getitem__(self, key: str) -> object:
        return self.values[key]


def cost_closure(spec: CostSpec) -> Tuple[Callable[[np.ndarray], np.ndarray], Tuple[float, float]]:
    """The cost ``f`` of a :class:`CostSpec` written out from its definition."""

    bound = float(spec.action_bound)
    if spec.variant == "sqrt_closed_form":
        return (lambda theta: -np.sqrt(np.clip(1.0 - np.square(theta), 0.0, None))), (-1.0, 1.0)
    if spec.variant == "quadratic":
        lam = float(spec.lam)
        return (lambda theta: 0.5 * lam * np.square(theta)), (-bound, bound)
    nodes = np.asarray(spec.table_theta, dtype=float)
    costs = np.asarray(spec.table_cost, dtype=float)
    return (lambda theta: np.interp(theta, nodes, costs)), (float(nodes[0]), float(nodes[-1]))


def oracle_hamiltonian(
    cost: Callable[[np.ndarray], np.ndarray],
    interval: Tuple[float, float],
    z: float,
    *,
    points: int = GRID_POINTS,
) -> OracleResult:
    """``sup_θ zθ − f(θ)`` by a dense grid, refined around the best node."""

    low, high = interval
    grid = np.linspace(low, high, points)
    gains = z * grid - cost(grid)
    best = int(np.argmax(gains))
    theta, value = float(grid[best]), float(gains[best])

    lo = grid[max(best - 1, 0)]
    hi = grid[min(best + 1, points - 1)]
    refined = optimize.minimize_scalar(
        lambda t: -(z * t - float(cost(np.asarray(t)))),
        bounds=(float(lo), float(hi)),
        method="bounded",
        options={"xatol": 1e-14},
    )
    if refined.success and -refined.fun > value:
        theta, value = float(refined.x), float(-refined.fun)
    return OracleResult(
        name="hamiltonian",
        inputs={"z": float(z), "interval": [float(low), float(high)]},
        values={"H": value, "argmax": theta},
        method="grid_sup",
    )


def _successors(prior: np.ndarray, theta: np.ndarray, dt: float) -> np.ndarray:
    root = math.sqrt(dt)
    xbar = float(theta @ prior)
    return np.stack([prior + prior * (theta - xbar) * (noise - xbar * dt) for noise in (root, -root)])


def oracle_onestep_equilibrium(
    model: MarketModel,
    dt: float,
    *,
    terminal: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    max_iter: int = FIXED_POINT_MAX_ITER,
) -> OracleResult:
    """Single-step equilibrium with ``ΔB = ±√Δt`` solved by direct iteration.

    Unknowns are ``θ_i`` at ``(0, p)``. Each sweep moves ``p`` to the successors
    ``x± = p + p(θ − X̄)(±√Δt − X̄Δt)``, reads ``Y_1 = terminal(x±)`` (zero for the
    model itself), sets ``Z₀ = (Y_1(x+) − Y_1(x−))/(2√Δt)`` and
    ``Y₀ = E[Y_1] + Δt H(v_i − P₀ + Z₀)``, then moves ``θ`` to the maximizer.
    """

    n = model.num_types
    if n > MAX_ONESTEP_TYPES:
        raise ValueError(f"oracle_onestep_equilibrium supports N <= {MAX_ONESTEP_TYPES}, got {n}")
    cost, interval = cost_closure(model.cost)
    v = np.asarray(model.values, dtype=float)
    p = np.asarray(model.prior, dtype=float)
    root = math.sqrt(dt)
    terminal = terminal or (lambda states: np.zeros_like(states))
    price = float(p @ v)

    theta = np.zeros(n)
    y0 = np.zeros(n)
    for iteration in range(1, max_iter + 1):
        successors = _successors(p, theta, dt)
        after = np.asarray(terminal(successors), dtype=float)
        z0 = (after[0] - after[1]) / (2.0 * root)
        new_theta = np.empty(n)
        new_y0 = np.empty(n)
        for i in range(n):
            result = oracle_hamiltonian(cost, interval, float(v[i] - price + z0[i]))
            new_theta[i] = result["argmax"]
            new_y0[i] = 0.5 * (after[0, i] + after[1, i]) + dt * float(result["H"])
        change = max(float(np.max(np.abs(new_theta - theta))), float(np.max(np.abs(new_y0 - y0))))
        theta, y0 = new_theta, new_y0
        if change < FIXED_POINT_TOL:
            break
    else:
        raise FixedPointOracleError(f"one-step fixed point did not converge in {max_iter} iterations")
    LOGGER.debug("One-step oracle settled after %d iterations", iteration)

    successors = _successors(p, theta, dt)
    after = np.asarray(terminal(successors), dtype=float)
    return OracleResult(
        name="onestep_equilibrium",
        inputs={"values": list(model.values), "prior": list(model.prior), "dt": float(dt)},
        values={
            "y0": y0.tolist(),
            "z0": ((after[0] - after[1]) / (2.0 * root)).tolist(),
            "theta0": theta.tolist(),
            "price0": price,
            "successors": successors.tolist(),
            "probabilities": [0.5, 0.5],
            "iterations": iteration,
        },
        method="binomial_fixed_point",
    )


def oracle_bridge_moments(v: float, t: float) -> OracleResult:
    """Mean and second moment of ``Q^v_t − v`` from the Itô isometry."""

    if not 0.0 <= t < 1.0:
        raise ValueError("t must lie in [0, 1)")
    mean = -v * (1.0 - t)
    second = v * v * (1.0 - t) ** 2 + t * (1.0 - t)
    return OracleResult(
        name="bridge_moments",
        inputs={"v": float(v), "t": float(t)},
        values={"mean": mean, "second_moment": second},
        method="closed_form",
    )
