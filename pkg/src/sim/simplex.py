"""Regular lattice on the probability simplex for N <= 3."""

from __future__ import annotations

import logging

import numpy as np
from scipy.interpolate import RegularGridInterpolator

LOGGER = logging.getLogger(__name__)

EPS_CLIP = 1e-12

__all__ = ["EPS_CLIP", "SimplexGrid", "project_to_simplex", "truncate_to_simplex"]


def truncate_to_simplex(points: np.ndarray) -> tuple[np.ndarray, int]:
    """Apply ``I(x) = 0 ∨ x ∧ 1`` componentwise, renormalize, and count clip events."""

    clipped = np.clip(points, 0.0, 1.0)
    events = int(np.count_nonzero(clipped != points))
    total = clipped.sum(axis=-1, keepdims=True)
    total = np.where(total > 0.0, total, 1.0)
    return np.where(total == 1.0, clipped, clipped / total), events


def project_to_simplex(points: np.ndarray, eps: float = EPS_CLIP) -> np.ndarray:
    """Clip to ``[eps, 1 - eps]`` and renormalize rows that do not already sum to 1."""

    if points.shape[-1] == 1:
        return np.ones_like(points)
    clipped = np.clip(points, eps, 1.0 - eps)
    total = clipped.sum(axis=-1, keepdims=True)
    return np.where(total == 1.0, clipped, clipped / total)


class SimplexGrid:
    """Closed lattice of spacing ``1/(simplex_grid + 1)`` on Δ_N.

    Values live on the active nodes (lattice points inside the closed simplex).
    Boundary nodes carry the degenerate dynamics; :attr:`interior_mask` selects the
    ``simplex_grid`` open-simplex nodes per dimension used for reporting. For
    N = 3 the square lattice cells beyond the hypotenuse borrow the value of a
    face node so multilinear interpolation stays defined up to the boundary.
    """

    def __init__(self, num_types: int, simplex_grid: int) -> None:
        if num_types not in (1, 2, 3):
            raise ValueError(f"grid solver supports N in {{1, 2, 3}}, got N={num_types}")
        if simplex_grid < 2:
            raise ValueError("simplex_grid must be >= 2")
        self.num_types = num_types
        self.dim = num_types - 1
        self.intervals = simplex_grid + 1
        self.axis = np.linspace(0.0, 1.0, self.intervals + 1)
        m = self.intervals

        if self.dim == 0:
            self.states = np.ones((1, 1))
            self._lattice_index = np.zeros(1, dtype=int)
        elif self.dim == 1:
            self.states = np.column_stack([self.axis, 1.0 - self.axis])
            self._lattice_index = np.arange(m + 1)
        else:
            ii, jj = np.meshgrid(np.arange(m + 1), np.arange(m + 1), indexing="ij")
            inside = (ii + jj) <= m
            active = np.full((m + 1, m + 1), -1, dtype=int)
            active[inside] = np.arange(int(inside.sum()))
            x1 = self.axis[ii[inside]]
            x2 = self.axis[jj[inside]]
            self.states = np.column_stack([x1, x2, np.clip(1.0 - x1 - x2, 0.0, 1.0)])
            excess = np.maximum(ii + jj - m, 0)
            face_i = ii - (excess + 1) // 2
            face_j = jj - excess // 2
            self._lattice_index = active[face_i, face_j]

        self.interior_mask = np.all(self.states > 0.0, axis=1)

    @property
    def num_nodes(self) -> int:
        return self.states.shape[0]

    def node_index(self, state: np.ndarray) -> int:
        """Index of the active node closest to ``state``."""

        distance = np.abs(self.states - np.asarray(state, dtype=float)[None, :]).sum(axis=1)
        return int(np.argmin(distance))

    def interpolate(self, values: np.ndarray, points: np.ndarray) -> np.ndarray:
        """Multilinear interpolation of node ``values`` (nodes, K) at ``points`` (M, N)."""

        values = np.asarray(values, dtype=float)
        points = np.asarray(points, dtype=float)
        squeeze = values.ndim == 1
        if squeeze:
            values = values[:, None]
        if self.dim == 0:
            out = np.broadcast_to(values[0], (points.shape[0], values.shape[1])).copy()
        else:
            table = values[self._lattice_index]
            grid = (self.axis,) * self.dim
            interpolator = RegularGridInterpolator(grid, table, method="linear", bounds_error=False, fill_value=None)
            out = interpolator(np.clip(points[:, : self.dim], 0.0, 1.0))
        return out[:, 0] if squeeze else out
