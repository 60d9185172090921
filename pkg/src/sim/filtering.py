"""Conditional law of the asset value given the order flow, under ℙ.

Two evaluations are provided: the exact ratio-of-weights formula and the Euler
scheme of the filter SDE. Feedback strategies read the state of the filter that is
being computed, so the two generally see different states.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, List

import numpy as np

from ..io.artifacts import write_csv
from ..market.model import MarketModel
from .paths import PathBundle
from .simplex import EPS_CLIP, project_to_simplex
from .strategies import FeedbackStrategy

LOGGER = logging.getLogger(__name__)

_BOUND_TOLERANCE = 1e-12

__all__ = ["FilterPath", "filter_exact", "filter_sde", "write_path_dump"]


@dataclass
class FilterPath:
    """Filter state ``X`` (paths, K+1, N), price ``P`` (paths, K+1), log-weights and rates."""

    times: np.ndarray
    brownian: np.ndarray
    state: np.ndarray
    price: np.ndarray
    log_weights: np.ndarray
    rates: np.ndarray
    clip_events: int = 0
    max_sum_defect: float = 0.0

    @property
    def num_paths(self) -> int:
        return self.state.shape[0]

    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    def to_rows(self, max_paths: int | None = None) -> Iterator[List[float]]:
        """Rows ``(path, step, t, B, X_1..X_N, P, M_1..M_N)`` for the path dump."""

        count = self.num_paths if max_paths is None else min(max_paths, self.num_paths)
        weights = self.weights()
        for j in range(count):
            for k, t in enumerate(self.times):
                yield [j, k, float(t), float(self.brownian[j, k]), *self.state[j, k], float(self.price[j, k]), *weights[j, k]]


def _check_rates(model: MarketModel, rates: np.ndarray, *, enforce_bound: bool) -> np.ndarray:
    if rates.shape[-1] != model.num_types:
        raise ValueError(f"strategy returned {rates.shape[-1]} rates for N={model.num_types}")
    if enforce_bound and np.any(np.abs(rates) > model.action_bound + _BOUND_TOLERANCE):
        raise ValueError(f"strategy exceeds the action bound {model.action_bound}")
    return rates


def _price(model: MarketModel, state: np.ndarray) -> np.ndarray:
    v = model.v
    return np.clip(state @ v, v.min(), v.max())


def filter_exact(
    model: MarketModel,
    strategy: FeedbackStrategy,
    bundle: PathBundle,
    *,
    enforce_bound: bool = True,
) -> FilterPath:
    """``X^i = p_i M^i / Σ_j p_j M^j`` evaluated pathwise in log-space."""

    paths, steps, n = bundle.num_paths, bundle.num_steps, model.num_types
    p = model.p
    dt = bundle.dt
    log_m = np.zeros((paths, steps + 1, n))
    state = np.empty((paths, steps + 1, n))
    rates = np.empty((paths, steps, n))

    for k in range(steps + 1):
        shifted = log_m[:, k, :] - log_m[:, k, :].max(axis=1, keepdims=True)
        scaled = p[None, :] * np.exp(shifted)
        denom = scaled.sum(axis=1, keepdims=True)
        if not np.all(np.isfinite(denom)) or np.any(denom <= 0.0):
            raise FloatingPointError(f"all log-weights underflowed at step {k}")
        state[:, k, :] = scaled / denom
        if k == steps:
            break
        theta = _check_rates(model, strategy.evaluate(k, state[:, k, :]), enforce_bound=enforce_bound)
        rates[:, k, :] = theta
        db = bundle.increments[:, k][:, None]
        log_m[:, k + 1, :] = log_m[:, k, :] + theta * db - 0.5 * theta * theta * dt[k]

    return FilterPath(
        times=bundle.times,
        brownian=bundle.brownian(),
        state=state,
        price=_price(model, state),
        log_weights=log_m,
        rates=rates,
    )


def filter_sde(
    model: MarketModel,
    strategy: FeedbackStrategy,
    bundle: PathBundle,
    *,
    eps_clip: float = EPS_CLIP,
    enforce_bound: bool = True,
) -> FilterPath:
    """Euler scheme ``X^i += X^i(θ^i − X̄)(ΔB − X̄Δt)`` followed by simplex projection.

    ``clip_events`` counts components that left ``[0, 1]`` before projection;
    ``max_sum_defect`` is the largest ``|Σ_i ΔX^i|`` of a raw Euler increment.
    """

    paths, steps, n = bundle.num_paths, bundle.num_steps, model.num_types
    dt = bundle.dt
    state = np.empty((paths, steps + 1, n))
    state[:, 0, :] = model.p[None, :]
    log_m = np.zeros((paths, steps + 1, n))
    rates = np.empty((paths, steps, n))
    clip_events = 0
    max_defect = 0.0

    for k in range(steps):
        x = state[:, k, :]
        theta = _check_rates(model, strategy.evaluate(k, x), enforce_bound=enforce_bound)
        rates[:, k, :] = theta
        xbar = np.sum(theta * x, axis=1, keepdims=True)
        db = bundle.increments[:, k][:, None]
        increment = x * (theta - xbar) * (db - xbar * dt[k])
        max_defect = max(max_defect, float(np.max(np.abs(increment.sum(axis=1)))))
        raw = x + increment
        clip_events += int(np.count_nonzero((raw < 0.0) | (raw > 1.0)))
        state[:, k + 1, :] = project_to_simplex(raw, eps_clip)
        log_m[:, k + 1, :] = log_m[:, k, :] + theta * db - 0.5 * theta * theta * dt[k]

    if clip_events:
        LOGGER.warning("Filter SDE left the simplex %d times before projection", clip_events)
    return FilterPath(
        times=bundle.times,
        brownian=bundle.brownian(),
        state=state,
        price=_price(model, state),
        log_weights=log_m,
        rates=rates,
        clip_events=clip_events,
        max_sum_defect=max_defect,
    )


def write_path_dump(path: FilterPath, destination: Path, *, max_paths: int = 20) -> Path:
    """CSV dump of the first ``max_paths`` paths."""

    n = path.state.shape[2]
    header = ["path", "step", "t", "B"] + [f"X_{i + 1}" for i in range(n)] + ["P"] + [f"M_{i + 1}" for i in range(n)]
    return write_csv(destination, header, path.to_rows(max_paths))
