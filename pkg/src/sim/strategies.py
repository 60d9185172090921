"""Insider strategies evaluated along a filter state."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, Tuple, runtime_checkable

import numpy as np

from .simplex import SimplexGrid

__all__ = [
    "ConstantStrategy",
    "FeedbackStrategy",
    "OpenLoopStrategy",
    "ShiftedStrategy",
    "TabulatedStrategy",
]


@runtime_checkable
class FeedbackStrategy(Protocol):
    """Per-type trading rate ``θ_i(t_k, x)``.

    ``evaluate`` receives the step index and the filter state of every path,
    shape (paths, N), and returns rates of the same shape.
    """

    num_types: int

    def evaluate(self, step: int, state: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class ConstantStrategy:
    rates: Tuple[float, ...]

    @property
    def num_types(self) -> int:
        return len(self.rates)

    def evaluate(self, step: int, state: np.ndarray) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.rates, dtype=float), state.shape).copy()


@dataclass(frozen=True)
class OpenLoopStrategy:
    """Pre-computed per-path rates, shape (paths, steps, N)."""

    rates: np.ndarray

    @property
    def num_types(self) -> int:
        return self.rates.shape[2]

    def evaluate(self, step: int, state: np.ndarray) -> np.ndarray:
        return np.asarray(self.rates[:, step, :], dtype=float)


@dataclass(frozen=True)
class TabulatedStrategy:
    """Rates on a simplex lattice: multilinear in ``x``, piecewise-constant in ``t``.

    ``table`` has shape (steps, nodes, N); the row for step ``k`` applies on
    ``[t_k, t_{k+1})``.
    """

    grid: SimplexGrid
    table: np.ndarray
    bound: float

    @property
    def num_types(self) -> int:
        return self.table.shape[2]

    @property
    def num_steps(self) -> int:
        return self.table.shape[0]

    def evaluate(self, step: int, state: np.ndarray) -> np.ndarray:
        row = self.table[min(step, self.num_steps - 1)]
        return np.clip(self.grid.interpolate(row, state), -self.bound, self.bound)


@dataclass(frozen=True)
class ShiftedStrategy:
    """``base + shift`` clipped to the action interval."""

    base: FeedbackStrategy
    shift: float
    bound: float

    @property
    def num_types(self) -> int:
        return self.base.num_types

    def evaluate(self, step: int, state: np.ndarray) -> np.ndarray:
        return np.clip(self.base.evaluate(step, state) + self.shift, -self.bound, self.bound)
