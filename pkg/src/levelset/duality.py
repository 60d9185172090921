"""Level-set side: forward processes, the control cost, and the zero-level probe.

For fixed ``(p, y)`` and a control pair ``(θ, Z)`` the forward system is

    X^i_{k+1} = X^i_k + X^i_k(θ^i − X̄)(ΔB − X̄Δt)
    Y^i_{k+1} = Y^i_k − H(Ẑ^i)Δt + Z^i ΔB,   Ẑ^i = v_i + Z^i − Σ_j v_j X^j,

and ``𝒥_i = E[|Y^i_T|² + Σ_k |h^i_k|^{4/3} Δt]`` with ``h = H(Ẑ) − Ẑθ + f(θ) >= 0``.
The value ``W(0, p, y)`` is the infimum of ``Σ_i 𝒥_i``; only upper bounds are computed.
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Literal, Optional, Protocol, Sequence, Tuple

import numpy as np

from ..io.artifacts import write_csv
from ..market.hamiltonian import hamiltonian_for
from ..market.model import MarketModel, normalize_prior
from ..sim.filtering import filter_sde
from ..sim.paths import PathBundle, gen_paths
from ..sim.strategies import ConstantStrategy, FeedbackStrategy
from ..solvers.bsde import ValueSurface
from ..solvers.fbsde import EquilibriumSolution, extract_strategy
from ..utils.parallel import map_blocks

LOGGER = logging.getLogger(__name__)

RUNNING_EXPONENT = 4.0 / 3.0
_LEVEL_FLOOR = 1e-10
_LEVEL_FACTOR = 10.0

__all__ = [
    "ControlPair",
    "ForwardPaths",
    "LevelSetReport",
    "MembershipMap",
    "SearchResult",
    "SearchSpec",
    "duality_probe",
    "equilibrium_controls",
    "eval_cost",
    "forward_paths",
    "search_W",
    "write_membership_csv",
    "zero_controls",
]


class ZetaFeedback(Protocol):
    num_types: int

    def evaluate(self, step: int, state: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class ConstantZeta:
    values: Tuple[float, ...]

    @property
    def num_types(self) -> int:
        return len(self.values)

    def evaluate(self, step: int, state: np.ndarray) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.values, dtype=float), state.shape).copy()


@dataclass(frozen=True)
class SurfaceZeta:
    """``ζ_i(t_k, x)`` read from a solved value surface."""

    surface: ValueSurface
    num_types: int

    def evaluate(self, step: int, state: np.ndarray) -> np.ndarray:
        return self.surface.zeta_at(min(step, self.surface.num_steps), state)


@dataclass(frozen=True)
class _BlockCorrection:
    """``base + table[block(k)]`` where time steps are grouped into equal blocks."""

    base: FeedbackStrategy | ZetaFeedback
    table: np.ndarray
    num_steps: int
    bound: Optional[float] = None

    @property
    def num_types(self) -> int:
        return self.base.num_types

    def evaluate(self, step: int, state: np.ndarray) -> np.ndarray:
        block = min(step * self.table.shape[0] // self.num_steps, self.table.shape[0] - 1)
        out = self.base.evaluate(step, state) + self.table[block][None, :]
        if self.bound is not None:
            out = np.clip(out, -self.bound, self.bound)
        return out


@dataclass(frozen=True)
class ControlPair:
    theta: FeedbackStrategy
    zeta: ZetaFeedback
    provenance: str = "user"


def zero_controls(model: MarketModel) -> ControlPair:
    zeros = (0.0,) * model.num_types
    return ControlPair(ConstantStrategy(zeros), ConstantZeta(zeros), provenance="zero")


def equilibrium_controls(solution: EquilibriumSolution) -> ControlPair:
    """``(θ*, ζ*)`` extracted from a converged equilibrium."""

    return ControlPair(
        extract_strategy(solution),
        SurfaceZeta(solution.surface, solution.model.num_types),
        provenance="equilibrium",
    )


@dataclass(frozen=True)
class ForwardPaths:
    state: np.ndarray
    values: np.ndarray
    running: np.ndarray


def _with_prior(model: MarketModel, p: Optional[Sequence[float]]) -> MarketModel:
    if p is None:
        return model
    return dataclasses.replace(model, prior=normalize_prior([float(x) for x in p]))


def forward_paths(
    model: MarketModel,
    y: Sequence[float],
    controls: ControlPair,
    bundle: PathBundle,
    *,
    p: Optional[Sequence[float]] = None,
) -> ForwardPaths:
    """Simulate ``X`` from ``p`` and ``Y`` from ``y``; ``running`` holds ``h`` per step."""

    instance = _with_prior(model, p)
    y_arr = np.asarray(y, dtype=float)
    if y_arr.shape != (instance.num_types,):
        raise ValueError(f"y must have N={instance.num_types} entries")
    ham = hamiltonian_for(instance.cost)
    v = instance.v
    path = filter_sde(instance, controls.theta, bundle)
    steps = bundle.num_steps

    increments = np.empty((bundle.num_paths, steps, instance.num_types))
    running = np.empty_like(increments)
    for k in range(steps):
        state = path.state[:, k, :]
        z = controls.zeta.evaluate(k, state)
        z_hat = v[None, :] + z - (state @ v)[:, None]
        h_val = ham.value(z_hat)
        theta = path.rates[:, k, :]
        running[:, k, :] = h_val - z_hat * theta + ham.cost(theta)
        increments[:, k, :] = -h_val * bundle.dt[k] + z * bundle.increments[:, k][:, None]

    values = np.empty((bundle.num_paths, steps + 1, instance.num_types))
    values[:, 0, :] = y_arr[None, :]
    values[:, 1:, :] = y_arr[None, None, :] + np.cumsum(increments, axis=1)
    return ForwardPaths(state=path.state, values=values, running=running)


@dataclass
class LevelSetReport:
    candidate: Tuple[float, ...]
    costs: np.ndarray
    cost_se: np.ndarray
    terminal: np.ndarray
    running: np.ndarray
    provenance: str
    search_trace: List[float] = field(default_factory=list)

    @property
    def total(self) -> float:
        return float(self.costs.sum())

    def to_dict(self) -> Dict[str, object]:
        return {
            "candidate": list(self.candidate),
            "costs": self.costs.tolist(),
            "cost_se": self.cost_se.tolist(),
            "terminal": self.terminal.tolist(),
            "running": self.running.tolist(),
            "total": self.total,
            "provenance": self.provenance,
            "search_trace": list(self.search_trace),
        }


def eval_cost(
    model: MarketModel,
    y: Sequence[float],
    controls: ControlPair,
    bundle: PathBundle,
    *,
    p: Optional[Sequence[float]] = None,
) -> LevelSetReport:
    """Per-type ``𝒥_i`` with standard errors and its terminal/running split."""

    forward = forward_paths(model, y, controls, bundle, p=p)
    terminal = forward.values[:, -1, :] ** 2
    running = np.einsum("pkn,k->pn", np.abs(forward.running) ** RUNNING_EXPONENT, bundle.dt)
    samples = terminal + running
    se = samples.std(axis=0, ddof=1) / np.sqrt(samples.shape[0]) if samples.shape[0] > 1 else np.zeros(samples.shape[1])
    return LevelSetReport(
        candidate=tuple(float(c) for c in y),
        costs=samples.mean(axis=0),
        cost_se=se,
        terminal=terminal.mean(axis=0),
        running=running.mean(axis=0),
        provenance=controls.provenance,
    )


# ----- Search -----


@dataclass(frozen=True)
class SearchSpec:
    """Coordinate descent over additive per-time-block corrections to ``θ`` and ``Z``."""

    time_blocks: int = 4
    initial_step: float = 0.25
    min_step: float = 1e-3
    max_evaluations: int = 400
    random_starts: int = 1
    random_scale: float = 0.5
    seed: int = 0
    threads: Optional[int] = None

    def __post_init__(self) -> None:
        if self.time_blocks < 1 or self.max_evaluations < 1:
            raise ValueError("time_blocks and max_evaluations must be positive")
        if not 0.0 < self.min_step <= self.initial_step:
            raise ValueError("require 0 < min_step <= initial_step")


@dataclass
class SearchResult:
    value: float
    controls: ControlPair
    start_values: List[float]
    trace: List[float]
    budget_exhausted: bool


def _corrected(base: ControlPair, theta_table: np.ndarray, zeta_table: np.ndarray, steps: int, bound: float) -> ControlPair:
    return ControlPair(
        _BlockCorrection(base.theta, theta_table, steps, bound),
        _BlockCorrection(base.zeta, zeta_table, steps),
        provenance=f"search:{base.provenance}",
    )


def _descend(
    model: MarketModel,
    y: Sequence[float],
    base: ControlPair,
    start: np.ndarray,
    bundle: PathBundle,
    spec: SearchSpec,
    p: Optional[Sequence[float]],
) -> Tuple[float, np.ndarray, List[float], bool]:
    n = model.num_types
    steps = bundle.num_steps
    bound = model.action_bound
    params = start.copy()

    def _value(candidate: np.ndarray) -> float:
        tables = candidate.reshape(2, spec.time_blocks, n)
        return eval_cost(model, y, _corrected(base, tables[0], tables[1], steps, bound), bundle, p=p).total

    best = _value(params)
    evaluations = 1
    trace = [best]
    step = spec.initial_step
    while step >= spec.min_step:
        improved = False
        for index in range(params.size):
            for direction in (1.0, -1.0):
                if evaluations >= spec.max_evaluations:
                    return best, params, trace, True
                trial = params.copy()
                trial[index] += direction * step
                value = _value(trial)
                evaluations += 1
                if value < best:
                    best, params, improved = value, trial, True
                    trace.append(best)
                    break
        if not improved:
            step *= 0.5
    return best, params, trace, False


def search_W(
    model: MarketModel,
    y: Sequence[float],
    spec: SearchSpec,
    bundle: PathBundle,
    *,
    starts: Optional[Sequence[ControlPair]] = None,
    p: Optional[Sequence[float]] = None,
) -> SearchResult:
    """Best ``Σ 𝒥_i`` found from each start plus seeded random perturbations.

    The default starts are the zero controls; pass the equilibrium controls to
    include them. The result is an upper bound on ``W(0, p, y)``.
    """

    bases = list(starts) if starts else [zero_controls(model)]
    size = 2 * spec.time_blocks * model.num_types
    rng = np.random.default_rng(spec.seed)
    runs: List[Tuple[ControlPair, np.ndarray]] = [(base, np.zeros(size)) for base in bases]
    for _ in range(spec.random_starts):
        runs.append((bases[0], rng.normal(scale=spec.random_scale, size=size)))

    def _run(lo: int, hi: int):
        base, start = runs[lo]
        return _descend(model, y, base, start, bundle, spec, p)

    outcomes = map_blocks(_run, [(r, r + 1) for r in range(len(runs))], spec.threads)
    winner = int(np.argmin([outcome[0] for outcome in outcomes]))
    value, params, trace, exhausted = outcomes[winner]
    base = runs[winner][0]
    tables = params.reshape(2, spec.time_blocks, model.num_types)
    if exhausted:
        LOGGER.warning("search_W stopped on its evaluation budget (%d)", spec.max_evaluations)
    return SearchResult(
        value=value,
        controls=_corrected(base, tables[0], tables[1], bundle.num_steps, model.action_bound),
        start_values=[outcome[2][0] for outcome in outcomes],
        trace=trace,
        budget_exhausted=exhausted,
    )


# ----- Duality probe -----


Verdict = Literal["in", "out"]


@dataclass(frozen=True)
class MembershipRow:
    candidate: Tuple[float, ...]
    cost_at_equilibrium: float
    best_search_value: float
    verdict: Verdict


@dataclass
class MembershipMap:
    level_tol: float
    rows: List[MembershipRow]

    def to_dict(self) -> Dict[str, object]:
        return {
            "level_tol": self.level_tol,
            "rows": [dataclasses.asdict(row) for row in self.rows],
        }


def duality_probe(
    model: MarketModel,
    equilibrium: EquilibriumSolution,
    y_grid: Sequence[Sequence[float]],
    *,
    bundle: Optional[PathBundle] = None,
    search_spec: Optional[SearchSpec] = None,
    level_tol: Optional[float] = None,
) -> MembershipMap:
    """Classify each ``y`` as in the numerical zero level set of ``W`` or out of it.

    ``level_tol`` defaults to ten times the cost at ``(Y₀, θ*, ζ*)``, floored at 1e-10.
    """

    bundle = bundle or _equilibrium_bundle(equilibrium)
    controls = equilibrium_controls(equilibrium)
    if level_tol is None:
        anchor = eval_cost(model, equilibrium.y0, controls, bundle).total
        level_tol = max(_LEVEL_FACTOR * anchor, _LEVEL_FLOOR)

    rows = []
    for candidate in y_grid:
        at_equilibrium = eval_cost(model, candidate, controls, bundle).total
        best = at_equilibrium
        if search_spec is not None:
            result = search_W(model, candidate, search_spec, bundle, starts=[controls, zero_controls(model)])
            best = min(best, result.value)
        verdict: Verdict = "in" if best < level_tol else "out"
        rows.append(MembershipRow(tuple(float(c) for c in candidate), at_equilibrium, best, verdict))
        LOGGER.debug("y=%s: equilibrium cost %.3e, best %.3e -> %s", candidate, at_equilibrium, best, verdict)
    return MembershipMap(level_tol=float(level_tol), rows=rows)


def _equilibrium_bundle(solution: EquilibriumSolution) -> PathBundle:
    return gen_paths(solution.disc, solution.model.horizon)


def write_membership_csv(membership: MembershipMap, destination: Path) -> Path:
    """Rows ``(y_1..y_N, cost_at_equilibrium_controls, best_search_value, verdict)``."""

    n = len(membership.rows[0].candidate) if membership.rows else 0
    header = [f"y_{i + 1}" for i in range(n)] + ["cost_at_equilibrium_controls", "best_search_value", "verdict"]
    rows = ([*row.candidate, row.cost_at_equilibrium, row.best_search_value, row.verdict] for row in membership.rows)
    return write_csv(destination, header, rows)
