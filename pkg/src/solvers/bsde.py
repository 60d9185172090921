"""Insider valuation: the linear BSDE of a fixed strategy and the Hamiltonian BSDE.

The grid solver steps ``u_i(t_k, x)`` backwards along the characteristic of the
filter: from each lattice node the two points ``x + bΔt ± σ√Δt`` are truncated to
the simplex, ``u_{k+1}`` is interpolated there, and

    E = (u⁺ + u⁻) / 2,   Z = (u⁺ − u⁻) / (2√Δt),   u_k = E + Δt·H(v_i − P + Z).

The regression solver replaces the interpolation by least squares on simulated
filter paths, so it works for any number of types.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from ..io.artifacts import write_csv
from ..market.hamiltonian import Hamiltonian, hamiltonian_for
from ..market.model import Discretization, MarketModel, SolverSettings
from ..sim.filtering import FilterPath
from ..sim.paths import PathBundle, log_girsanov_weights
from ..sim.simplex import SimplexGrid, truncate_to_simplex
from ..sim.strategies import FeedbackStrategy, TabulatedStrategy
from .regression import RegressionFit, fit_regression

LOGGER = logging.getLogger(__name__)

PriceMap = Callable[[float, np.ndarray], np.ndarray]

__all__ = [
    "InnerFixedPointError",
    "PriceMap",
    "ValueSurface",
    "bsde_solve_grid",
    "bsde_solve_regress",
    "constant_price_map",
    "filter_price_map",
    "value_of_strategy",
    "write_value_surface",
]


class InnerFixedPointError(RuntimeError):
    """The per-node fixed point for ``θ = dH(Ẑ)`` did not converge."""

    def __init__(self, t: float, x: Sequence[float], residual: float) -> None:
        self.t = float(t)
        self.x = tuple(float(value) for value in x)
        self.residual = float(residual)
        coords = ", ".join(f"{value:.6g}" for value in self.x)
        super().__init__(f"inner fixed point did not converge at t={self.t:.6g}, x=({coords}); residual {self.residual:.3e}")


def filter_price_map(model: MarketModel) -> PriceMap:
    """``P(t, x) = Σ_i v_i x_i``."""

    v = model.v

    def _price(t: float, states: np.ndarray) -> np.ndarray:
        return np.clip(states @ v, v.min(), v.max())

    return _price


def constant_price_map(price: float | Sequence[float]) -> PriceMap:
    """A price that ignores ``(t, x)``; a sequence gives one price per type."""

    level = np.asarray(price, dtype=float)

    def _price(t: float, states: np.ndarray) -> np.ndarray:
        if level.ndim == 0:
            return np.full(states.shape[0], float(level))
        return np.broadcast_to(level, (states.shape[0], level.size)).copy()

    return _price


@dataclass
class ValueSurface:
    """Backward solution ``u_i(t_k, ·)`` with its Z-surface ``ζ_i(t_k, ·)``.

    Grid form fills ``grid``, ``u`` and ``zeta`` (arrays of shape (K+1, nodes, N),
    with ``u[K] = ζ[K] = 0``). Regression form fills ``fits`` with one
    ``(value_fit, z_fit)`` pair per step ``k < K`` plus the pathwise ``(Y, Z)``.
    """

    times: np.ndarray
    y0: np.ndarray
    grid: Optional[SimplexGrid] = None
    u: Optional[np.ndarray] = None
    zeta: Optional[np.ndarray] = None
    fits: List[Tuple[RegressionFit, RegressionFit]] = field(default_factory=list)
    path_values: Optional[np.ndarray] = None
    path_z: Optional[np.ndarray] = None
    y0_se: Optional[np.ndarray] = None
    cv_residuals: Optional[np.ndarray] = None
    clip_events: int = 0

    @property
    def is_grid(self) -> bool:
        return self.grid is not None

    @property
    def num_steps(self) -> int:
        return self.times.size - 1

    def value_at(self, step: int, states: np.ndarray) -> np.ndarray:
        """``u(t_step, x)`` for states (M, N); returns (M, N)."""

        if self.is_grid:
            return self.grid.interpolate(self.u[step], states)
        if step >= self.num_steps:
            return np.zeros_like(states)
        return self.fits[step][0].predict(_features(states))

    def zeta_at(self, step: int, states: np.ndarray) -> np.ndarray:
        if self.is_grid:
            return self.grid.interpolate(self.zeta[step], states)
        if step >= self.num_steps:
            return np.zeros_like(states)
        return self.fits[step][1].predict(_features(states))


def _features(states: np.ndarray) -> np.ndarray:
    return states[:, :-1]


# ----- Linear BSDE -----


def value_of_strategy(
    model: MarketModel,
    value: float,
    price: np.ndarray | float,
    rates: np.ndarray | float,
    bundle: PathBundle,
) -> Tuple[float, float]:
    """Monte Carlo ``J = E[M^θ_T Σ_k ((v − P_k)θ_k − f(θ_k))Δt_k]`` with its standard error.

    ``price`` is (paths, K) or (paths, K+1) or a scalar; ``rates`` is (paths, K) or a scalar.
    """

    shape = (bundle.num_paths, bundle.num_steps)
    theta = np.broadcast_to(np.asarray(rates, dtype=float), shape)
    price_arr = np.asarray(price, dtype=float)
    if price_arr.ndim == 2 and price_arr.shape[1] == bundle.num_steps + 1:
        price_arr = price_arr[:, :-1]
    price_arr = np.broadcast_to(price_arr, shape)

    ham = hamiltonian_for(model.cost)
    running = ((value - price_arr) * theta - ham.cost(theta)) * bundle.dt[None, :]
    weights = np.exp(log_girsanov_weights(theta, bundle.increments, bundle.dt)[:, -1])
    samples = weights * running.sum(axis=1)
    estimate = float(samples.mean())
    se = float(samples.std(ddof=1) / np.sqrt(samples.size)) if samples.size > 1 else 0.0
    return estimate, se


# ----- Grid solver -----


def _characteristic_points(states: np.ndarray, theta: np.ndarray, dt: float) -> Tuple[np.ndarray, np.ndarray, int]:
    xbar = np.sum(theta * states, axis=1, keepdims=True)
    sigma = states * (theta - xbar)
    drift = -sigma * xbar
    shift = sigma * np.sqrt(dt)
    upper, events_up = truncate_to_simplex(states + drift * dt + shift)
    lower, events_down = truncate_to_simplex(states + drift * dt - shift)
    return upper, lower, events_up + events_down


def _backward_slice(
    grid: SimplexGrid,
    u_next: np.ndarray,
    theta: np.ndarray,
    dt: float,
) -> Tuple[np.ndarray, np.ndarray, int]:
    upper, lower, events = _characteristic_points(grid.states, theta, dt)
    u_up = grid.interpolate(u_next, upper)
    u_down = grid.interpolate(u_next, lower)
    return 0.5 * (u_up + u_down), (u_up - u_down) / (2.0 * np.sqrt(dt)), events


def _node_prices(price_map: PriceMap, t: float, states: np.ndarray, num_types: int) -> np.ndarray:
    price = np.asarray(price_map(t, states), dtype=float)
    if price.ndim == 1:
        price = np.repeat(price[:, None], num_types, axis=1)
    return price


def _market_rates(strategy: FeedbackStrategy, grid: SimplexGrid, step: int) -> np.ndarray:
    if isinstance(strategy, TabulatedStrategy) and strategy.grid is grid:
        row = strategy.table[min(step, strategy.num_steps - 1)]
        return np.clip(row, -strategy.bound, strategy.bound)
    return strategy.evaluate(step, grid.states)


def _self_consistent_slice(
    grid: SimplexGrid,
    u_next: np.ndarray,
    v: np.ndarray,
    price: np.ndarray,
    dt: float,
    t: float,
    settings: SolverSettings,
    ham: Hamiltonian,
    theta_start: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, int]:
    theta = theta_start.copy()
    residual = np.inf
    for _ in range(settings.inner_max_iter):
        expect, z, events = _backward_slice(grid, u_next, theta, dt)
        proposal = ham.argmax(v[None, :] - price + z)
        change = np.max(np.abs(proposal - theta), axis=1)
        residual = float(change.max())
        if residual < settings.inner_tol:
            return expect, z, proposal, events
        theta = settings.inner_damping * theta + (1.0 - settings.inner_damping) * proposal
    worst = int(np.argmax(change))
    raise InnerFixedPointError(t, grid.states[worst], residual)


def bsde_solve_grid(
    model: MarketModel,
    price_map: PriceMap,
    disc: Discretization,
    *,
    market_strategy: Optional[FeedbackStrategy] = None,
    settings: Optional[SolverSettings] = None,
    grid: Optional[SimplexGrid] = None,
) -> ValueSurface:
    """Hamiltonian BSDE ``Y^i_t = ∫_t^T H(v_i − P + Z^i) ds − ∫_t^T Z^i dB`` on the simplex lattice.

    With ``market_strategy`` the filter diffuses under that feedback and every step
    is explicit. Without it the market believes the insider plays ``dH(Ẑ)`` and each
    node solves the damped fixed point ``θ = dH(Ẑ(θ))`` (``settings.scheme ==
    "explicit"`` takes ``θ`` from the previous slice instead).
    """

    settings = settings or SolverSettings()
    grid = grid or SimplexGrid(model.num_types, disc.simplex_grid)
    ham = hamiltonian_for(model.cost)
    times = disc.times(model.horizon)
    steps, nodes, n = disc.num_steps, grid.num_nodes, model.num_types
    v = model.v

    u = np.zeros((steps + 1, nodes, n))
    zeta = np.zeros((steps + 1, nodes, n))
    clip_events = 0
    theta_prev = ham.argmax(v[None, :] - _node_prices(price_map, times[-1], grid.states, n))

    for k in range(steps - 1, -1, -1):
        dt = float(times[k + 1] - times[k])
        price = _node_prices(price_map, float(times[k]), grid.states, n)
        if market_strategy is not None:
            theta = _market_rates(market_strategy, grid, k)
            expect, z, events = _backward_slice(grid, u[k + 1], theta, dt)
        elif settings.scheme == "explicit":
            expect, z, events = _backward_slice(grid, u[k + 1], theta_prev, dt)
        else:
            expect, z, theta_prev, events = _self_consistent_slice(
                grid, u[k + 1], v, price, dt, float(times[k]), settings, ham, theta_prev
            )
        z_hat = v[None, :] - price + z
        u[k] = expect + dt * ham.value(z_hat)
        zeta[k] = z
        clip_events += events
        if market_strategy is None and settings.scheme == "explicit":
            theta_prev = ham.argmax(z_hat)

    y0 = grid.interpolate(u[0], model.p[None, :])[0]
    LOGGER.debug("Grid BSDE solved: %d steps x %d nodes, Y0=%s", steps, nodes, np.array2string(y0, precision=8))
    return ValueSurface(times=times, y0=y0, grid=grid, u=u, zeta=zeta, clip_events=clip_events)


# ----- Regression solver -----


def bsde_solve_regress(
    model: MarketModel,
    path: FilterPath,
    bundle: PathBundle,
    *,
    basis_degree: int = 3,
    price: Optional[np.ndarray] = None,
) -> ValueSurface:
    """Backward least-squares scheme along simulated filter paths.

    ``Y_k = Ê[Y_{k+1} | X_k] + Δt·H(v − P_k + Z_k)`` with ``Z_k`` regressed on the
    residual ``(Y_{k+1} − Ê[Y_{k+1} | X_k])ΔB_k/Δt``. ``price`` (paths, K+1) or
    (paths, K+1, N) overrides the filter price. ``y0_se`` is the standard error of
    the pathwise estimator ``Σ_k [Δt·H(Ẑ_k) − Z_k ΔB_k]``.
    """

    ham = hamiltonian_for(model.cost)
    n = model.num_types
    steps = bundle.num_steps
    dt = bundle.dt
    v = model.v
    price_arr = path.price if price is None else np.asarray(price, dtype=float)
    if price_arr.ndim == 2:
        price_arr = np.repeat(price_arr[:, :, None], n, axis=2)

    values = np.zeros((bundle.num_paths, steps + 1, n))
    z_path = np.zeros((bundle.num_paths, steps, n))
    drivers = np.zeros((bundle.num_paths, steps, n))
    fits: List[Tuple[RegressionFit, RegressionFit]] = [None] * steps  # type: ignore[list-item]
    cv = np.zeros(steps)

    for k in range(steps - 1, -1, -1):
        features = _features(path.state[:, k, :])
        target = values[:, k + 1, :]
        value_fit = fit_regression(features, target, basis_degree, label=f"value step {k}")
        expect = value_fit.predict(features)
        db = bundle.increments[:, k][:, None]
        z_fit = fit_regression(features, (target - expect) * db / dt[k], basis_degree, label=f"z step {k}")
        z = z_fit.predict(features)
        driver = ham.value(v[None, :] - price_arr[:, k, :] + z)
        values[:, k, :] = expect + dt[k] * driver
        z_path[:, k, :] = z
        drivers[:, k, :] = driver
        fits[k] = (value_fit, z_fit)
        cv[k] = value_fit.cv_rmse

    pathwise = np.einsum("pkn,k->pn", drivers, dt) - np.einsum("pkn,pk->pn", z_path, bundle.increments)
    se = pathwise.std(axis=0, ddof=1) / np.sqrt(bundle.num_paths) if bundle.num_paths > 1 else np.zeros(n)
    y0 = values[:, 0, :].mean(axis=0)
    LOGGER.debug("Regression BSDE solved: %d paths, Y0=%s", bundle.num_paths, np.array2string(y0, precision=8))
    return ValueSurface(
        times=bundle.times,
        y0=y0,
        fits=fits,
        path_values=values,
        path_z=z_path,
        y0_se=se,
        cv_residuals=cv,
    )


# ----- Persistence -----


def write_value_surface(surface: ValueSurface, destination: Path) -> Path:
    """CSV ``(t, x_1..x_N, u_1..u_N, zeta_1..zeta_N)`` on the open-simplex nodes.

    Regression surfaces are written as coefficient rows ``(t, kind, type, c_0..)``.
    """

    if surface.is_grid:
        grid = surface.grid
        n = grid.num_types
        mask = grid.interior_mask if np.any(grid.interior_mask) else np.ones(grid.num_nodes, dtype=bool)
        header = (
            ["t"] + [f"x_{i + 1}" for i in range(n)] + [f"u_{i + 1}" for i in range(n)] + [f"zeta_{i + 1}" for i in range(n)]
        )

        def _rows():
            for k, t in enumerate(surface.times):
                for node in np.flatnonzero(mask):
                    yield [float(t), *grid.states[node], *surface.u[k, node], *surface.zeta[k, node]]

        return write_csv(destination, header, _rows())

    width = max(max(a.coefficients.shape[0], b.coefficients.shape[0]) for a, b in surface.fits) if surface.fits else 1
    header = ["t", "kind", "type"] + [f"c_{j}" for j in range(width)]

    def _coefficient_rows():
        for k, (value_fit, z_fit) in enumerate(surface.fits):
            for kind, fit in (("u", value_fit), ("zeta", z_fit)):
                coefficients = fit.coefficients.reshape(fit.coefficients.shape[0], -1)
                for i in range(coefficients.shape[1]):
                    padded = list(coefficients[:, i]) + [""] * (width - coefficients.shape[0])
                    yield [float(surface.times[k]), kind, i + 1, *padded]

    return write_csv(destination, header, _coefficient_rows())
