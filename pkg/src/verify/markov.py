"""Regression diagnostic for the Markov property of a price process under ℙ.

The increment ``S_{t+Δ} − S_t`` is regressed on ``(1, S_t, A_t)``. If ``S`` is
Markov in its own filtration, the auxiliary statistic ``A_t`` carries no
predictive power once ``S_t`` is known.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, Literal, Optional, Tuple

import numpy as np

from ..market.model import Discretization
from ..sim.paths import gen_paths

LOGGER = logging.getLogger(__name__)

MARKOV_Z = 4.0
NON_MARKOV_Z = 6.0
MIN_PATHS = 100_000
_REDUNDANT_FRACTION = 1e-12

Verdict = Literal["markov-consistent", "non-markov", "inconclusive"]

__all__ = [
    "MARKOV_Z",
    "MIN_PATHS",
    "NON_MARKOV_Z",
    "MarkovReport",
    "equilibrium_markov_inputs",
    "markov_test",
    "toy_sg_paths",
]


@dataclass(frozen=True)
class MarkovReport:
    t: float
    delta: float
    num_paths: int
    coefficient: float
    std_error: float
    z_score: float
    verdict: Verdict
    redundant: bool = False
    state_coefficient: float = 0.0

    def to_dict(self) -> Dict[str, object]:
        return {
            "t": self.t,
            "delta": self.delta,
            "num_paths": self.num_paths,
            "coefficient": self.coefficient,
            "std_error": self.std_error,
            "z_score": self.z_score,
            "verdict": self.verdict,
            "redundant": self.redundant,
            "state_coefficient": self.state_coefficient,
        }


def _verdict(z: float) -> Verdict:
    if abs(z) < MARKOV_Z:
        return "markov-consistent"
    if abs(z) > NON_MARKOV_Z:
        return "non-markov"
    return "inconclusive"


def _time_index(times: np.ndarray, t: float) -> int:
    index = int(np.argmin(np.abs(times - t)))
    if abs(times[index] - t) > 1e-9 * max(1.0, abs(t)):
        raise ValueError(f"t={t!r} is not on the time grid")
    return index


def _ols(design: np.ndarray, target: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    coefficients, _, _, _ = np.linalg.lstsq(design, target, rcond=None)
    residual = target - design @ coefficients
    dof = design.shape[0] - design.shape[1]
    sigma2 = float(residual @ residual) / dof
    covariance = sigma2 * np.linalg.inv(design.T @ design)
    return coefficients, np.sqrt(np.diag(covariance))


def markov_test(
    price: np.ndarray,
    auxiliary: np.ndarray,
    times: np.ndarray,
    t: float,
    delta: float,
    *,
    min_paths: int = MIN_PATHS,
) -> MarkovReport:
    """Test whether ``A_t`` predicts ``S_{t+Δ} − S_t`` beyond ``S_t``.

    ``price`` and ``auxiliary`` are (paths, K+1) on ``times``. Verdicts use
    ``|z| < 4`` (Markov-consistent) and ``|z| > 6`` (non-Markov).
    """

    price = np.asarray(price, dtype=float)
    auxiliary = np.asarray(auxiliary, dtype=float)
    times = np.asarray(times, dtype=float)
    if price.shape != auxiliary.shape or price.shape[1] != times.size:
        raise ValueError("price and auxiliary paths must share the (paths, K+1) shape of the time grid")
    if price.shape[0] < min_paths:
        raise ValueError(f"markov_test needs at least {min_paths} paths, got {price.shape[0]}")
    if t + delta > times[-1] + 1e-12:
        raise ValueError(f"t + delta = {t + delta!r} exceeds the horizon {times[-1]!r}")

    start = _time_index(times, t)
    stop = _time_index(times, t + delta)
    state = price[:, start]
    aux = auxiliary[:, start]
    increment = price[:, stop] - state
    if np.var(state) <= 0.0:
        raise ValueError(f"price has zero variance at t={t!r}; the regression is degenerate")

    ones = np.ones_like(state)
    base = np.column_stack([ones, state])
    fit_aux, _, _, _ = np.linalg.lstsq(base, aux, rcond=None)
    aux_residual = aux - base @ fit_aux
    aux_var = float(np.var(aux))
    if aux_var == 0.0 or float(np.var(aux_residual)) < _REDUNDANT_FRACTION * aux_var:
        coefficients, _ = _ols(base, increment)
        LOGGER.info("Auxiliary statistic is affine in the price at t=%g; reporting it as redundant", t)
        return MarkovReport(
            t=float(t),
            delta=float(delta),
            num_paths=price.shape[0],
            coefficient=0.0,
            std_error=0.0,
            z_score=0.0,
            verdict="markov-consistent",
            redundant=True,
            state_coefficient=float(coefficients[1]),
        )

    coefficients, errors = _ols(np.column_stack([ones, state, aux]), increment)
    z = float(coefficients[2] / errors[2])
    report = MarkovReport(
        t=float(t),
        delta=float(delta),
        num_paths=price.shape[0],
        coefficient=float(coefficients[2]),
        std_error=float(errors[2]),
        z_score=z,
        verdict=_verdict(z),
        state_coefficient=float(coefficients[1]),
    )
    LOGGER.info("Markov test t=%g delta=%g: coefficient %.4g (z=%.2f) -> %s", t, delta, report.coefficient, z, report.verdict)
    return report


def toy_sg_paths(
    disc: Discretization,
    horizon: float = 1.0,
    *,
    threads: Optional[int] = None,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Paths of ``S_t = ∫_0^t B_s ds + B_t`` and ``A_t = ∫_0^t B_s ds``.

    This is the price of the two-dimensional ``(S, Γ)`` system with ``Γ_t = 2/3 + B_t``;
    ``S`` is not Markov in its own filtration. Returns ``(S, A, times)``.
    """

    bundle = gen_paths(disc, horizon, threads=threads)
    brownian = bundle.brownian()
    integral = np.zeros_like(brownian)
    np.cumsum(brownian[:, :-1] * bundle.dt[None, :], axis=1, out=integral[:, 1:])
    return integral + brownian, integral, bundle.times


def equilibrium_markov_inputs(solution) -> Tuple[np.ndarray, np.ndarray]:
    """Price paths of a solved equilibrium and the filtered ``X¹`` as auxiliary.

    For two types the price is affine in ``X¹``, so a Markov price leaves the
    auxiliary redundant.
    """

    path = solution.path
    return np.asarray(path.price, dtype=float), np.asarray(path.state[:, :, 0], dtype=float)
