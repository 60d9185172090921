"""Equilibrium FBSDE by Picard iteration on the truncated system.

Each iteration solves the insider BSDE with the market's current belief about the
strategy, then updates that belief to ``θ = dH(v + ζ − Σ v_j x_j)``. The loop stops
when successive value and Z surfaces agree to ``picard_tol`` in sup-norm.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Literal, Optional, Sequence

import numpy as np

from ..market.hamiltonian import hamiltonian_for
from ..market.model import Discretization, MarketModel, SolverSettings
from ..sim.filtering import FilterPath, filter_sde
from ..sim.paths import PathBundle, gen_paths
from ..sim.simplex import SimplexGrid
from ..sim.strategies import ConstantStrategy, FeedbackStrategy, TabulatedStrategy
from ..utils.metrics import metrics
from .bsde import PriceMap, ValueSurface, bsde_solve_grid, bsde_solve_regress, filter_price_map

LOGGER = logging.getLogger(__name__)

SolverKind = Literal["grid", "regress"]

_DIAGNOSTIC_PATHS = 2000
_MAX_GRID_TYPES = 3

__all__ = [
    "ContractionReport",
    "EquilibriumSolution",
    "HorizonSweep",
    "IterationRecord",
    "PicardDivergenceError",
    "RegressionStrategy",
    "UniquenessReport",
    "default_initializations",
    "extract_strategy",
    "picard_diagnostics",
    "revelation_profile",
    "solve_fbsde",
    "sweep_horizon",
    "uniqueness_probe",
]


class PicardDivergenceError(RuntimeError):
    """Picard iteration hit its cap; ``delta_log`` holds the per-iteration deltas."""

    def __init__(self, delta_log: Sequence[float], message: str | None = None) -> None:
        self.delta_log = [float(delta) for delta in delta_log]
        last = self.delta_log[-1] if self.delta_log else float("nan")
        super().__init__(message or f"Picard iteration did not converge in {len(self.delta_log)} iterations (last delta {last:.3e})")


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    delta: float
    clip_events: int
    max_sum_defect: float

    def to_dict(self) -> Dict[str, float]:
        return {
            "iteration": self.iteration,
            "delta": self.delta,
            "clip_events": self.clip_events,
            "max_sum_defect": self.max_sum_defect,
        }


class RegressionStrategy:
    """``θ_i(t_k, x) = dH(v_i + ζ_i(t_k, x) − Σ_j v_j x_j)`` from regression Z-surfaces."""

    def __init__(self, model: MarketModel, surface: ValueSurface) -> None:
        self.model = model
        self.surface = surface
        self.num_types = model.num_types
        self._ham = hamiltonian_for(model.cost)

    def evaluate(self, step: int, state: np.ndarray) -> np.ndarray:
        step = min(step, self.surface.num_steps - 1)
        v = self.model.v
        z_hat = v[None, :] + self.surface.zeta_at(step, state) - (state @ v)[:, None]
        return self._ham.argmax(z_hat)


class _BlendedStrategy:
    """``(1 − d)·new + d·old`` for damped Picard updates."""

    def __init__(self, new: FeedbackStrategy, old: FeedbackStrategy, damping: float) -> None:
        self.new = new
        self.old = old
        self.damping = damping
        self.num_types = new.num_types

    def evaluate(self, step: int, state: np.ndarray) -> np.ndarray:
        return (1.0 - self.damping) * self.new.evaluate(step, state) + self.damping * self.old.evaluate(step, state)


@dataclass
class EquilibriumSolution:
    """Converged Picard iterate with the final forward pass from ``X_0 = p``."""

    model: MarketModel
    disc: Discretization
    settings: SolverSettings
    solver: SolverKind
    surface: ValueSurface
    strategy: FeedbackStrategy
    path: FilterPath
    path_values: np.ndarray
    path_z: np.ndarray
    history: List[IterationRecord] = field(default_factory=list)
    converged: bool = True

    @property
    def delta_log(self) -> List[float]:
        return [record.delta for record in self.history]

    @property
    def iterations(self) -> int:
        return len(self.history)

    @property
    def y0(self) -> np.ndarray:
        return self.surface.y0

    @property
    def y0_se(self) -> Optional[np.ndarray]:
        return self.surface.y0_se

    @property
    def clip_events(self) -> int:
        return self.path.clip_events

    @property
    def max_sum_defect(self) -> float:
        return self.path.max_sum_defect

    @property
    def truncation_active(self) -> bool:
        """True when the final forward pass needed the simplex projection."""

        return self.path.clip_events > 0

    def price_map(self) -> PriceMap:
        return filter_price_map(self.model)

    def summary(self) -> Dict[str, object]:
        return {
            "solver": self.solver,
            "converged": self.converged,
            "iterations": self.iterations,
            "delta_log": self.delta_log,
            "y0": self.y0.tolist(),
            "y0_se": None if self.y0_se is None else self.y0_se.tolist(),
            "clip_events": self.clip_events,
            "max_sum_defect": self.max_sum_defect,
            "truncation_active": self.truncation_active,
            "history": [record.to_dict() for record in self.history],
        }


def _grid_table(grid: SimplexGrid, strategy: Optional[FeedbackStrategy], steps: int, num_types: int, bound: float) -> np.ndarray:
    if strategy is None:
        return np.zeros((steps, grid.num_nodes, num_types))
    if isinstance(strategy, TabulatedStrategy) and strategy.table.shape == (steps, grid.num_nodes, num_types):
        return np.clip(np.array(strategy.table, dtype=float), -bound, bound)
    return np.stack([np.clip(strategy.evaluate(k, grid.states), -bound, bound) for k in range(steps)])


def _surface_delta(new: np.ndarray, new_z: np.ndarray, old: Optional[np.ndarray], old_z: Optional[np.ndarray]) -> float:
    if old is None:
        return float(max(np.max(np.abs(new)), np.max(np.abs(new_z))))
    return float(max(np.max(np.abs(new - old)), np.max(np.abs(new_z - old_z))))


def _diagnostic_pass(model: MarketModel, strategy: FeedbackStrategy, bundle: PathBundle) -> FilterPath:
    return filter_sde(model, strategy, bundle.head(min(bundle.num_paths, _DIAGNOSTIC_PATHS)))


def _check_delta(delta: float, history: List[IterationRecord]) -> None:
    if not np.isfinite(delta):
        raise PicardDivergenceError([record.delta for record in history], "Picard iteration produced a non-finite delta")


def _solve_grid(
    model: MarketModel,
    disc: Discretization,
    settings: SolverSettings,
    bundle: PathBundle,
    initial_strategy: Optional[FeedbackStrategy],
) -> EquilibriumSolution:
    grid = SimplexGrid(model.num_types, disc.simplex_grid)
    ham = hamiltonian_for(model.cost)
    bound = model.action_bound
    steps = disc.num_steps
    v = model.v
    node_price = (grid.states @ v)[None, :, None]
    price_map = filter_price_map(model)

    theta = _grid_table(grid, initial_strategy, steps, model.num_types, bound)
    history: List[IterationRecord] = []
    previous: Optional[ValueSurface] = None
    surface: Optional[ValueSurface] = None

    for iteration in range(1, settings.picard_max_iter + 1):
        market = TabulatedStrategy(grid=grid, table=theta, bound=bound)
        surface = bsde_solve_grid(model, price_map, disc, market_strategy=market, settings=settings, grid=grid)
        update = ham.argmax(v[None, None, :] + surface.zeta[:steps] - node_price)
        if settings.damping > 0.0:
            update = (1.0 - settings.damping) * update + settings.damping * theta
        delta = _surface_delta(
            surface.u, surface.zeta, None if previous is None else previous.u, None if previous is None else previous.zeta
        )
        theta = update
        diagnostic = _diagnostic_pass(model, TabulatedStrategy(grid=grid, table=theta, bound=bound), bundle)
        history.append(IterationRecord(iteration, delta, diagnostic.clip_events, diagnostic.max_sum_defect))
        LOGGER.debug("Picard %d: delta=%.3e clip_events=%d", iteration, delta, diagnostic.clip_events)
        _check_delta(delta, history)
        previous = surface
        if delta < settings.picard_tol:
            break
    else:
        _raise_divergence(history)

    strategy = TabulatedStrategy(grid=grid, table=theta, bound=bound)
    path = filter_sde(model, strategy, bundle)
    values = np.stack([surface.value_at(k, path.state[:, k, :]) for k in range(steps + 1)], axis=1)
    zs = np.stack([surface.zeta_at(k, path.state[:, k, :]) for k in range(steps)], axis=1)
    return EquilibriumSolution(model, disc, settings, "grid", surface, strategy, path, values, zs, history)


def _solve_regress(
    model: MarketModel,
    disc: Discretization,
    settings: SolverSettings,
    bundle: PathBundle,
    initial_strategy: Optional[FeedbackStrategy],
) -> EquilibriumSolution:
    strategy: FeedbackStrategy = initial_strategy or ConstantStrategy((0.0,) * model.num_types)
    history: List[IterationRecord] = []
    previous: Optional[ValueSurface] = None
    surface: Optional[ValueSurface] = None

    for iteration in range(1, settings.picard_max_iter + 1):
        path = filter_sde(model, strategy, bundle)
        surface = bsde_solve_regress(model, path, bundle, basis_degree=disc.basis_degree)
        update: FeedbackStrategy = RegressionStrategy(model, surface)
        if settings.damping > 0.0:
            update = _BlendedStrategy(update, strategy, settings.damping)
        delta = _surface_delta(
            surface.path_values,
            surface.path_z,
            None if previous is None else previous.path_values,
            None if previous is None else previous.path_z,
        )
        history.append(IterationRecord(iteration, delta, path.clip_events, path.max_sum_defect))
        LOGGER.debug("Picard %d: delta=%.3e clip_events=%d", iteration, delta, path.clip_events)
        _check_delta(delta, history)
        strategy = update
        previous = surface
        if delta < settings.picard_tol:
            break
    else:
        _raise_divergence(history)

    path = filter_sde(model, strategy, bundle)
    steps = bundle.num_steps
    values = np.stack([surface.value_at(k, path.state[:, k, :]) for k in range(steps + 1)], axis=1)
    zs = np.stack([surface.zeta_at(k, path.state[:, k, :]) for k in range(steps)], axis=1)
    return EquilibriumSolution(model, disc, settings, "regress", surface, strategy, path, values, zs, history)


def _raise_divergence(history: List[IterationRecord]) -> None:
    deltas = [record.delta for record in history]
    LOGGER.warning("Picard iteration did not converge after %d iterations (last delta %.3e)", len(deltas), deltas[-1])
    raise PicardDivergenceError(deltas)


def solve_fbsde(
    model: MarketModel,
    disc: Discretization,
    solver: SolverKind = "grid",
    *,
    settings: Optional[SolverSettings] = None,
    bundle: Optional[PathBundle] = None,
    initial_strategy: Optional[FeedbackStrategy] = None,
    threads: Optional[int] = None,
) -> EquilibriumSolution:
    """Solve the coupled equilibrium system; ``θ⁰ ≡ 0`` unless ``initial_strategy`` is given."""

    settings = settings or SolverSettings()
    if solver == "grid" and model.num_types > _MAX_GRID_TYPES:
        raise ValueError(f"grid solver supports N <= {_MAX_GRID_TYPES}; use solver='regress' for N={model.num_types}")
    if solver not in ("grid", "regress"):
        raise ValueError(f"unknown solver {solver!r}")
    if bundle is None:
        with metrics.stage("gen_paths", paths=disc.num_paths):
            bundle = gen_paths(disc, model.horizon, threads=threads)

    with metrics.stage(f"picard_{solver}", paths=bundle.num_paths):
        if solver == "grid":
            solution = _solve_grid(model, disc, settings, bundle, initial_strategy)
        else:
            solution = _solve_regress(model, disc, settings, bundle, initial_strategy)
    metrics.increment("picard_iterations", solution.iterations)
    metrics.extend("picard_delta", solution.delta_log)
    if solution.truncation_active:
        LOGGER.warning("Final forward pass touched the simplex truncation (%d events)", solution.clip_events)
    LOGGER.info(
        "Equilibrium (%s) converged in %d iterations; Y0=%s",
        solver,
        solution.iterations,
        np.array2string(solution.y0, precision=8),
    )
    return solution


def extract_strategy(solution: EquilibriumSolution) -> FeedbackStrategy:
    """Equilibrium feedback ``θ*_i(t_k, x) = dH(Ẑ^i)``."""

    return solution.strategy


# ----- Diagnostics -----


@dataclass(frozen=True)
class ContractionReport:
    deltas: List[float]
    ratios: List[float]
    verdict: Literal["geometric", "stagnation", "divergence"]
    final_delta: float

    @property
    def geometric(self) -> bool:
        return self.verdict == "geometric"

    def to_dict(self) -> Dict[str, object]:
        return {"deltas": self.deltas, "ratios": self.ratios, "verdict": self.verdict, "final_delta": self.final_delta}


def picard_diagnostics(source: EquilibriumSolution | PicardDivergenceError | Sequence[float]) -> ContractionReport:
    """Successive delta ratios with a contraction verdict.

    The verdict is ``geometric`` when every ratio over the second half of the
    log is below 1, ``divergence`` when the last delta exceeds the first, and
    ``stagnation`` otherwise.
    """

    if isinstance(source, EquilibriumSolution):
        deltas = source.delta_log
    elif isinstance(source, PicardDivergenceError):
        deltas = source.delta_log
    else:
        deltas = [float(delta) for delta in source]
    if not deltas:
        raise ValueError("empty Picard log")

    ratios = [later / earlier for earlier, later in zip(deltas, deltas[1:]) if earlier > 0.0]
    tail = ratios[len(ratios) // 2 :]
    if tail and max(tail) < 1.0:
        verdict = "geometric"
    elif not ratios and deltas[-1] == 0.0:
        verdict = "geometric"
    elif deltas[-1] > deltas[0]:
        verdict = "divergence"
    else:
        verdict = "stagnation"
    return ContractionReport(deltas=list(deltas), ratios=ratios, verdict=verdict, final_delta=deltas[-1])


@dataclass(frozen=True)
class HorizonRecord:
    horizon: float
    converged: bool
    iterations: int
    final_delta: float
    y0: Optional[List[float]] = None


@dataclass(frozen=True)
class HorizonSweep:
    records: List[HorizonRecord]

    @property
    def largest_convergent(self) -> Optional[float]:
        good = [record.horizon for record in self.records if record.converged]
        return max(good) if good else None

    def to_dict(self) -> Dict[str, object]:
        return {
            "largest_convergent": self.largest_convergent,
            "records": [asdict(record) for record in self.records],
        }


def sweep_horizon(
    model: MarketModel,
    disc: Discretization,
    horizons: Sequence[float],
    *,
    solver: SolverKind = "grid",
    settings: Optional[SolverSettings] = None,
) -> HorizonSweep:
    """Run the equilibrium solver at each horizon and record where Picard converges."""

    records = []
    for horizon in horizons:
        instance = model.with_horizon(float(horizon))
        try:
            solution = solve_fbsde(instance, disc, solver, settings=settings)
        except PicardDivergenceError as exc:
            LOGGER.info("T=%g: no convergence after %d iterations", horizon, len(exc.delta_log))
            final = exc.delta_log[-1] if exc.delta_log else float("nan")
            records.append(HorizonRecord(float(horizon), False, len(exc.delta_log), final))
            continue
        records.append(
            HorizonRecord(float(horizon), True, solution.iterations, solution.delta_log[-1], solution.y0.tolist())
        )
    return HorizonSweep(records)


@dataclass(frozen=True)
class UniquenessReport:
    y0: np.ndarray
    pairwise: np.ndarray

    @property
    def spread(self) -> float:
        return float(self.pairwise.max()) if self.pairwise.size else 0.0


def default_initializations(model: MarketModel, disc: Discretization, *, seed: int = 0) -> List[FeedbackStrategy]:
    """``θ⁰ ≡ 0``, ``±bound`` and two random tables on the grid."""

    n, bound = model.num_types, model.action_bound
    starts: List[FeedbackStrategy] = [
        ConstantStrategy((0.0,) * n),
        ConstantStrategy((bound,) * n),
        ConstantStrategy((-bound,) * n),
    ]
    if n <= _MAX_GRID_TYPES:
        grid = SimplexGrid(n, disc.simplex_grid)
        rng = np.random.default_rng(seed)
        for _ in range(2):
            table = rng.uniform(-bound, bound, size=(disc.num_steps, grid.num_nodes, n))
            starts.append(TabulatedStrategy(grid=grid, table=table, bound=bound))
    return starts


def uniqueness_probe(
    model: MarketModel,
    disc: Discretization,
    initial_feedbacks: Optional[Sequence[FeedbackStrategy]] = None,
    *,
    settings: Optional[SolverSettings] = None,
) -> UniquenessReport:
    """Pairwise sup-norm distance between grid solutions from distinct Picard starts."""

    starts = list(initial_feedbacks) if initial_feedbacks is not None else default_initializations(model, disc)
    bundle = gen_paths(disc.replace(num_paths=min(disc.num_paths, _DIAGNOSTIC_PATHS)), model.horizon)
    solutions = [solve_fbsde(model, disc, "grid", settings=settings, bundle=bundle, initial_strategy=s) for s in starts]
    pairwise = np.zeros((len(solutions), len(solutions)))
    for a, b in itertools.combinations(range(len(solutions)), 2):
        first, second = solutions[a].surface, solutions[b].surface
        gap = _surface_delta(first.u, first.zeta, second.u, second.zeta)
        pairwise[a, b] = pairwise[b, a] = gap
    return UniquenessReport(y0=np.stack([s.y0 for s in solutions]), pairwise=pairwise)


def revelation_profile(solution: EquilibriumSolution) -> np.ndarray:
    """``E^{ℙ^{θ*i}}[X^i_t]`` per type on the time grid, shape (N, K+1)."""

    path = solution.path
    weighted = np.exp(path.log_weights) * path.state
    return weighted.mean(axis=0).T
