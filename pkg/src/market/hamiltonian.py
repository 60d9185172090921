"""Insider Hamiltonian ``H(z) = sup_θ [zθ - f(θ)]`` and its maximizer."""

from __future__ import annotations

import logging
from functools import lru_cache
from typing import Tuple

import numpy as np

from .model import CostSpec

LOGGER = logging.getLogger(__name__)

_ACTION_TOLERANCE = 1e-12
_TABLE_CHUNK = 4096

__all__ = ["Hamiltonian", "cost_eval", "ham_eval", "hamiltonian_for"]


class Hamiltonian:
    """Vectorized evaluation of ``H``, ``dH = argmax`` and the cost ``f``.

    Closed-form variants use the printed formulas. For the tabulated variant ``H`` is
    the table maximum, which is the exact sup over the piecewise-linear cost; ``dH``
    moves the winning node to the vertex of the parabola through its neighbours
    when that vertex lies strictly between them. The Fenchel gap at ``dH`` then
    vanishes only up to the table spacing.
    """

    def __init__(self, spec: CostSpec) -> None:
        self.spec = spec
        self.bound = float(spec.action_bound)
        if spec.variant == "tabulated":
            self._theta = np.asarray(spec.table_theta, dtype=float)
            self._cost = np.asarray(spec.table_cost, dtype=float)
            if self._theta.size < 3:
                raise ValueError("tabulated Hamiltonian needs at least 3 grid points")
        self.lipschitz = self._lipschitz_constant()

    # ----- Public API -----

    def evaluate(self, z: np.ndarray | float) -> Tuple[np.ndarray, np.ndarray]:
        """Return ``(H(z), dH(z))`` with the shape of ``z``."""

        z_arr = np.asarray(z, dtype=float)
        if not np.all(np.isfinite(z_arr)):
            raise ValueError("Hamiltonian argument must be finite")
        variant = self.spec.variant
        if variant == "sqrt_closed_form":
            norm = np.hypot(1.0, z_arr)
            return norm, z_arr / norm
        if variant == "quadratic":
            lam = float(self.spec.lam)
            theta = np.clip(z_arr / lam, -self.bound, self.bound)
            return z_arr * theta - 0.5 * lam * theta * theta, theta
        return self._evaluate_table(z_arr)

    def value(self, z: np.ndarray | float) -> np.ndarray:
        return self.evaluate(z)[0]

    def argmax(self, z: np.ndarray | float) -> np.ndarray:
        return self.evaluate(z)[1]

    def cost(self, theta: np.ndarray | float) -> np.ndarray:
        """Evaluate ``f(θ)``; ``θ`` must lie in the action interval."""

        theta_arr = np.asarray(theta, dtype=float)
        if np.any(np.abs(theta_arr) > self.bound + _ACTION_TOLERANCE):
            worst = float(np.max(np.abs(theta_arr)))
            raise ValueError(f"theta={worst!r} lies outside the action interval [-{self.bound}, {self.bound}]")
        variant = self.spec.variant
        if variant == "sqrt_closed_form":
            return -np.sqrt(np.maximum(1.0 - theta_arr * theta_arr, 0.0))
        if variant == "quadratic":
            return 0.5 * float(self.spec.lam) * theta_arr * theta_arr
        return np.interp(theta_arr, self._theta, self._cost)

    def fenchel_gap(self, z: np.ndarray, theta: np.ndarray) -> np.ndarray:
        """``H(z) - zθ + f(θ)``; nonnegative, zero at ``θ = dH(z)``."""

        return self.value(z) - z * theta + self.cost(theta)

    # ----- Internals -----

    def _evaluate_table(self, z: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        # H is the sup of zθ - f over the piecewise-linear cost, attained at a table node.
        flat = z.reshape(-1)
        h_out = np.empty_like(flat)
        d_out = np.empty_like(flat)
        theta, cost = self._theta, self._cost
        last = theta.size - 1
        for start in range(0, flat.size, _TABLE_CHUNK):
            block = flat[start : start + _TABLE_CHUNK]
            gains = block[:, None] * theta[None, :] - cost[None, :]
            best = np.argmax(gains, axis=1)
            rows = np.arange(block.size)
            h_out[start : start + block.size] = gains[rows, best]
            d_val = theta[best]

            interior = (best > 0) & (best < last)
            if np.any(interior):
                k = best[interior]
                r = rows[interior]
                x0, x1, x2 = theta[k - 1], theta[k], theta[k + 1]
                y0, y1, y2 = gains[r, k - 1], gains[r, k], gains[r, k + 1]
                denom = (x0 - x1) * (x0 - x2) * (x1 - x2)
                a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom
                b = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / denom
                concave = a < 0.0
                vertex = np.where(concave, -b / np.where(concave, 2.0 * a, 1.0), x1)
                inside = concave & (vertex > x0) & (vertex < x2)
                d_sel = d_val[interior]
                d_sel[inside] = vertex[inside]
                d_val[interior] = d_sel

            d_out[start : start + block.size] = d_val
        return h_out.reshape(z.shape), d_out.reshape(z.shape)

    def _lipschitz_constant(self) -> float:
        variant = self.spec.variant
        if variant == "sqrt_closed_form":
            return 1.0
        if variant == "quadratic":
            return 1.0 / float(self.spec.lam)
        theta, cost = self._theta, self._cost
        slopes = np.diff(cost) / np.diff(theta)
        mids = 0.5 * (theta[1:] + theta[:-1])
        curvature = np.diff(slopes) / np.diff(mids)
        smallest = float(curvature.min())
        if smallest <= 0.0:
            LOGGER.warning("Tabulated cost is not strictly convex; dH has no finite Lipschitz bound")
            return float("inf")
        return 1.0 / smallest


@lru_cache(maxsize=32)
def hamiltonian_for(spec: CostSpec) -> Hamiltonian:
    return Hamiltonian(spec)


def ham_eval(spec: CostSpec, z: float) -> Tuple[float, float]:
    """Scalar convenience wrapper returning ``(H(z), dH(z))``."""

    h_val, d_val = hamiltonian_for(spec).evaluate(np.asarray(z, dtype=float))
    return float(h_val), float(d_val)


def cost_eval(spec: CostSpec, theta: float) -> float:
    return float(hamiltonian_for(spec).cost(np.asarray(theta, dtype=float)))
