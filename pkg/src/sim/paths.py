"""Brownian path bundles drawn from keyed counter-based substreams."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..market.model import Discretization
from ..utils.parallel import block_ranges, map_blocks

LOGGER = logging.getLogger(__name__)

_PATH_BLOCK = 2048

__all__ = ["PathBundle", "gen_paths", "girsanov_weight", "log_girsanov_weights", "path_generator"]


@dataclass(frozen=True)
class PathBundle:
    """Brownian increments ``ΔB`` (paths × steps) on the time grid ``times``.

    Path ``start + j`` of the bundle was drawn from the substream keyed by
    ``(seed, start + j)``.
    """

    increments: np.ndarray
    times: np.ndarray
    seed: int = 0
    start: int = 0

    def __post_init__(self) -> None:
        increments = np.asarray(self.increments, dtype=float)
        times = np.asarray(self.times, dtype=float)
        if increments.ndim != 2:
            raise ValueError("increments must be a (paths, steps) array")
        if times.shape != (increments.shape[1] + 1,):
            raise ValueError("times must have one more entry than there are steps")
        if np.any(np.diff(times) <= 0.0):
            raise ValueError("time grid must be strictly increasing")
        object.__setattr__(self, "increments", increments)
        object.__setattr__(self, "times", times)

    @property
    def num_paths(self) -> int:
        return self.increments.shape[0]

    @property
    def num_steps(self) -> int:
        return self.increments.shape[1]

    @property
    def dt(self) -> np.ndarray:
        return np.diff(self.times)

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    def brownian(self) -> np.ndarray:
        """Cumulative path ``B_{t_k}`` with ``B_0 = 0``; shape (paths, steps + 1)."""

        out = np.zeros((self.num_paths, self.num_steps + 1))
        np.cumsum(self.increments, axis=1, out=out[:, 1:])
        return out

    def coarsen(self, factor: int) -> "PathBundle":
        """Sum consecutive increments so a coarser grid sees the same Brownian paths."""

        if factor < 1 or self.num_steps % factor:
            raise ValueError(f"factor {factor} does not divide num_steps={self.num_steps}")
        if factor == 1:
            return self
        coarse = self.increments.reshape(self.num_paths, self.num_steps // factor, factor).sum(axis=2)
        return PathBundle(increments=coarse, times=self.times[::factor], seed=self.seed, start=self.start)

    def head(self, count: int) -> "PathBundle":
        return PathBundle(increments=self.increments[:count], times=self.times, seed=self.seed, start=self.start)


def path_generator(seed: int, path_index: int) -> np.random.Generator:
    """Generator for the substream keyed by ``(seed, path_index)``."""

    key = np.array([seed, path_index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def gen_paths(
    disc: Discretization,
    horizon: float = 1.0,
    *,
    times: Optional[np.ndarray] = None,
    start: int = 0,
    count: Optional[int] = None,
    threads: Optional[int] = None,
) -> PathBundle:
    """Draw paths ``start .. start+count`` (default: all ``disc.num_paths``).

    ``times`` overrides the uniform grid on ``[0, horizon]``; each increment is
    ``sqrt(Δt_k)`` times a standard normal drawn in step order.
    """

    grid = disc.times(horizon) if times is None else np.asarray(times, dtype=float)
    num_steps = grid.size - 1
    if num_steps < 1:
        raise ValueError("time grid needs at least one step")
    scale = np.sqrt(np.diff(grid))
    total = disc.num_paths if count is None else int(count)
    increments = np.empty((total, num_steps))

    def _fill(lo: int, hi: int) -> None:
        for row in range(lo, hi):
            rng = path_generator(disc.seed, start + row)
            increments[row] = rng.standard_normal(num_steps) * scale

    map_blocks(_fill, block_ranges(total, _PATH_BLOCK), threads)
    LOGGER.debug("Generated %d paths x %d steps (seed=%d, start=%d)", total, num_steps, disc.seed, start)
    return PathBundle(increments=increments, times=grid, seed=disc.seed, start=start)


def log_girsanov_weights(theta: np.ndarray, increments: np.ndarray, dt: np.ndarray) -> np.ndarray:
    """``log M_k = Σ_{m<k} θ_m ΔB_m − ½ Σ_{m<k} θ_m² Δt_m`` with ``log M_0 = 0``.

    ``theta`` and ``increments`` are (paths, steps); the result is (paths, steps + 1).
    """

    theta = np.broadcast_to(np.asarray(theta, dtype=float), increments.shape)
    step = theta * increments - 0.5 * theta * theta * dt[None, :]
    out = np.zeros((increments.shape[0], increments.shape[1] + 1))
    np.cumsum(step, axis=1, out=out[:, 1:])
    return out


def girsanov_weight(theta_path: np.ndarray | float, bundle: PathBundle, path_index: int) -> np.ndarray:
    """Per-step Girsanov weight ``M`` along one path of ``bundle``."""

    theta = np.broadcast_to(np.asarray(theta_path, dtype=float), (bundle.num_steps,))
    log_m = log_girsanov_weights(theta[None, :], bundle.increments[path_index : path_index + 1], bundle.dt)
    return np.exp(log_m[0])
