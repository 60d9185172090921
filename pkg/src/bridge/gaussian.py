"""Gaussian value with identity pricing: the bridge equilibrium and its truncation.

With ``T = 1``, ``V ~ N(0, 1)`` and ``P*_t = Q_t`` the insider of type ``v`` plays
``θ*(v; t, q) = (v − q)/(1 − t)``, which drives ``Q`` along a Brownian bridge to
``v``. The strategy is unbounded near ``t = 1``; ``θ^R`` stops it at
``τ_R = inf{t : |Q_t| >= R} ∧ (1 − 1/R)``. Integrals over the law of ``V`` use
probabilists' Gauss-Hermite quadrature.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import hermite_e

from ..market.model import Discretization
from ..sim.paths import PathBundle, gen_paths
from ..utils.parallel import block_ranges, map_blocks
from ..verify.certificate import EpsilonCertificate

LOGGER = logging.getLogger(__name__)

_PATH_BLOCK = 8192

__all__ = [
    "BridgeInstance",
    "BridgePaths",
    "BridgeValue",
    "FixedPointReport",
    "RATE_COLUMNS",
    "RateReport",
    "RateRow",
    "bridge_certificate",
    "bridge_strategy",
    "bridge_values",
    "gaussian_fixed_point_check",
    "gauss_hermite",
    "geometric_time_grid",
    "simulate_bridge",
    "truncation_rate",
]


@dataclass(frozen=True)
class BridgeInstance:
    """Truncation level ``R`` plus the numerical resolution of a bridge study."""

    truncation: float
    num_paths: int = 100_000
    seed: int = 42
    quadrature_nodes: int = 64
    grid_steps: int = 256
    mismatch_steps: int = 1024

    def __post_init__(self) -> None:
        if not self.truncation > 1.0:
            raise ValueError(f"truncation level R must exceed 1, got {self.truncation!r}")
        if self.num_paths < 2 or self.quadrature_nodes < 2 or self.grid_steps < 1 or self.mismatch_steps < 1:
            raise ValueError("bridge resolution parameters must be positive (num_paths, nodes >= 2)")

    @property
    def horizon(self) -> float:
        return 1.0

    @property
    def stop_time(self) -> float:
        return 1.0 - 1.0 / self.truncation

    def discretization(self, num_steps: int) -> Discretization:
        return Discretization(num_steps=num_steps, num_paths=self.num_paths, seed=self.seed)


def bridge_strategy(v: float, t: float, q: float) -> float:
    """``θ*(v; t, q) = (v − q)/(1 − t)``."""

    if t >= 1.0:
        raise ValueError(f"bridge strategy is singular at t >= 1, got t={t!r}")
    return (v - q) / (1.0 - t)


def geometric_time_grid(t_max: float, num_steps: int) -> np.ndarray:
    """Times with ``1 − t_k = (1 − t_max)^{k/K}``, so steps shrink like ``1 − t``."""

    if not 0.0 < t_max < 1.0:
        raise ValueError(f"t_max must lie in (0, 1), got {t_max!r}")
    k = np.arange(num_steps + 1) / num_steps
    times = 1.0 - (1.0 - t_max) ** k
    times[0] = 0.0
    times[-1] = t_max
    return times


def gauss_hermite(nodes: int) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes and weights integrating against the standard normal law."""

    points, weights = hermite_e.hermegauss(nodes)
    return points, weights / np.sqrt(2.0 * np.pi)


def _stochastic_integral(bundle: PathBundle) -> np.ndarray:
    """Left-point ``I_k = Σ_{j<k} ΔB_j/(1 − t_j)``; shape (paths, K+1)."""

    out = np.zeros((bundle.num_paths, bundle.num_steps + 1))
    np.cumsum(bundle.increments / (1.0 - bundle.times[:-1])[None, :], axis=1, out=out[:, 1:])
    return out


@dataclass(frozen=True)
class BridgePaths:
    times: np.ndarray
    q: np.ndarray
    theta: np.ndarray
    brownian: np.ndarray

    def ode_defect(self) -> float:
        """``max |Q_t − ∫_0^t θ̂ ds − B_t|`` with the left-point time integral."""

        dt = np.diff(self.times)
        drift = np.zeros_like(self.q)
        np.cumsum(self.theta[:, :-1] * dt[None, :], axis=1, out=drift[:, 1:])
        return float(np.max(np.abs(self.q - drift - self.brownian)))


def simulate_bridge(v: float, bundle: PathBundle) -> BridgePaths:
    """``Q^v_t = vt + (1 − t)∫_0^t dB/(1 − s)`` and ``θ̂^v_t = v − ∫_0^t dB/(1 − s)``."""

    times = bundle.times
    if times[-1] >= 1.0:
        raise ValueError("bridge paths must stop strictly before t = 1")
    integral = _stochastic_integral(bundle)
    q = v * times[None, :] + (1.0 - times)[None, :] * integral
    return BridgePaths(times=times, q=q, theta=v - integral, brownian=bundle.brownian())


def _stopped_index(q: np.ndarray, level: float) -> np.ndarray:
    """First grid index with ``|q| >= level``, else the last index."""

    hit = np.abs(q) >= level
    first = np.argmax(hit, axis=1)
    return np.where(hit.any(axis=1), first, q.shape[1] - 1)


def _terminal_gaps(instance: BridgeInstance, bundle: PathBundle, nodes: np.ndarray) -> np.ndarray:
    """``(Q^{θ^R, v}_1 − v)²`` per path and node; shape (paths, nodes)."""

    integral = _stochastic_integral(bundle)
    times = bundle.times
    rows = np.arange(bundle.num_paths)
    out = np.empty((bundle.num_paths, nodes.size))
    for m, v in enumerate(nodes):
        q = v * times[None, :] + (1.0 - times)[None, :] * integral
        stopped = q[rows, _stopped_index(q, instance.truncation)]
        out[:, m] = (stopped - v) ** 2
    return out


def _stream(instance: BridgeInstance, times: np.ndarray, fn, threads: Optional[int]) -> np.ndarray:
    """Evaluate ``fn(bundle)`` on path blocks of the instance and stack the rows in order."""

    disc = instance.discretization(times.size - 1)

    def _run(lo: int, hi: int) -> np.ndarray:
        bundle = gen_paths(disc, times=times, start=lo, count=hi - lo, threads=1)
        return fn(bundle)

    parts = map_blocks(_run, block_ranges(instance.num_paths, _PATH_BLOCK), threads)
    return np.concatenate(parts, axis=0)


def _mean_se(samples: np.ndarray) -> Tuple[float, float]:
    return float(samples.mean()), float(samples.std(ddof=1) / np.sqrt(samples.size))


@dataclass(frozen=True)
class BridgeValue:
    closed_form: float
    monte_carlo: Optional[float] = None
    monte_carlo_se: Optional[float] = None
    gap: Optional[float] = None
    gap_se: Optional[float] = None


def bridge_values(
    v: float,
    instance: Optional[BridgeInstance] = None,
    *,
    threads: Optional[int] = None,
) -> BridgeValue:
    """Optimal value ``(v² + 1)/2`` with a Monte Carlo check of ``E[vQ_1 − (Q_1² − 1)/2]``.

    The check runs the truncated strategy; ``gap`` is the closed form minus the
    Monte Carlo value, which equals ``½E|Q^{θ^R}_1 − v|²``.
    """

    closed = 0.5 * (v * v + 1.0)
    if instance is None:
        return BridgeValue(closed)

    times = geometric_time_grid(instance.stop_time, instance.grid_steps)
    node = np.array([float(v)])

    def _block(bundle: PathBundle) -> np.ndarray:
        integral = _stochastic_integral(bundle)
        q = v * bundle.times[None, :] + (1.0 - bundle.times)[None, :] * integral
        terminal = q[np.arange(bundle.num_paths), _stopped_index(q, instance.truncation)]
        return np.column_stack([v * terminal - 0.5 * (terminal * terminal - 1.0), _terminal_gaps(instance, bundle, node)[:, 0]])

    samples = _stream(instance, times, _block, threads)
    mc, mc_se = _mean_se(samples[:, 0])
    gap, gap_se = _mean_se(0.5 * samples[:, 1])
    return BridgeValue(closed, mc, mc_se, gap, gap_se)


@dataclass(frozen=True)
class RateRow:
    truncation: float
    eps2: float
    eps2_se: float
    eps2_identity: float
    eps2_identity_se: float
    eta: float
    eta_se: float
    early_stop_fraction: float

    def as_list(self) -> List[float]:
        return [
            self.truncation,
            self.eps2,
            self.eps2_se,
            self.eps2_identity,
            self.eps2_identity_se,
            self.eta,
            self.eta_se,
            self.early_stop_fraction,
        ]


RATE_COLUMNS = ["R", "eps2", "eps2_se", "eps2_identity", "eps2_identity_se", "eta", "eta_se", "early_stop_fraction"]


@dataclass(frozen=True)
class RateReport:
    rows: List[RateRow]
    eps2_slope: float
    eta_slope: float
    eta_constant: float

    def to_dict(self) -> Dict[str, object]:
        return {
            "eps2_slope": self.eps2_slope,
            "eta_slope": self.eta_slope,
            "eta_constant": self.eta_constant,
            "rows": [dict(zip(RATE_COLUMNS, row.as_list())) for row in self.rows],
        }


def _price_mismatch(instance: BridgeInstance, threads: Optional[int]) -> Tuple[float, float, float, float, float]:
    """Direct ``E∫|B_t − B_{τ∧t}|² dt`` and the identity ``½E[(1 − τ)²]`` under ℙ."""

    times = np.linspace(0.0, 1.0, instance.mismatch_steps + 1)
    stop_index = int(np.searchsorted(times, instance.stop_time, side="right")) - 1

    def _block(bundle: PathBundle) -> np.ndarray:
        brownian = bundle.brownian()
        hit = np.abs(brownian[:, : stop_index + 1]) >= instance.truncation
        first = np.where(hit.any(axis=1), np.argmax(hit, axis=1), stop_index)
        rows = np.arange(bundle.num_paths)
        frozen = brownian[rows, first]
        after = np.arange(times.size)[None, :] > first[:, None]
        deviation = np.where(after, brownian - frozen[:, None], 0.0)
        direct = np.sum(deviation[:, :-1] ** 2 * bundle.dt[None, :], axis=1)
        tau = times[first]
        return np.column_stack([direct, 0.5 * (1.0 - tau) ** 2, (first < stop_index).astype(float)])

    samples = _stream(instance, times, _block, threads)
    direct, direct_se = _mean_se(samples[:, 0])
    identity, identity_se = _mean_se(samples[:, 1])
    return direct, direct_se, identity, identity_se, float(samples[:, 2].mean())


def _eta(instance: BridgeInstance, threads: Optional[int]) -> Tuple[float, float]:
    """``η = ½ ∫ E|Q^{θ^R}_1 − v|² μ(dv)``; the stopped bridge is frozen at ``τ_R``."""

    nodes, weights = gauss_hermite(instance.quadrature_nodes)
    times = geometric_time_grid(instance.stop_time, instance.grid_steps)

    def _block(bundle: PathBundle) -> np.ndarray:
        return (0.5 * _terminal_gaps(instance, bundle, nodes) @ weights)[:, None]

    samples = _stream(instance, times, _block, threads)
    return _mean_se(samples[:, 0])


def _sqrt_se(mean_sq: float, se_sq: float) -> Tuple[float, float]:
    root = float(np.sqrt(max(mean_sq, 0.0)))
    return root, (se_sq / (2.0 * root) if root > 0.0 else 0.0)


def truncation_rate(
    levels: Sequence[float],
    *,
    num_paths: int = 100_000,
    seed: int = 42,
    quadrature_nodes: int = 64,
    grid_steps: int = 256,
    mismatch_steps: int = 1024,
    threads: Optional[int] = None,
) -> RateReport:
    """ε₂(R) and η(R) for each truncation level with log-log slopes against R."""

    if len(levels) < 3:
        raise ValueError(f"truncation_rate needs at least 3 levels, got {len(levels)}")
    rows = []
    for level in levels:
        instance = BridgeInstance(
            truncation=float(level),
            num_paths=num_paths,
            seed=seed,
            quadrature_nodes=quadrature_nodes,
            grid_steps=grid_steps,
            mismatch_steps=mismatch_steps,
        )
        direct, direct_se, identity, identity_se, early = _price_mismatch(instance, threads)
        eps2, eps2_se = _sqrt_se(direct, direct_se)
        eps2_identity, eps2_identity_se = _sqrt_se(identity, identity_se)
        eta, eta_se = _eta(instance, threads)
        LOGGER.info("R=%g: eps2=%.4g eps2(identity)=%.4g eta=%.4g", level, eps2, eps2_identity, eta)
        rows.append(RateRow(float(level), eps2, eps2_se, eps2_identity, eps2_identity_se, eta, eta_se, early))

    log_r = np.log([row.truncation for row in rows])
    eps2_slope = float(np.polyfit(log_r, np.log([row.eps2 for row in rows]), 1)[0])
    eta_slope, eta_intercept = np.polyfit(log_r, np.log([row.eta for row in rows]), 1)
    return RateReport(rows=rows, eps2_slope=eps2_slope, eta_slope=float(eta_slope), eta_constant=float(np.exp(eta_intercept)))


@dataclass(frozen=True)
class FixedPointReport:
    t: float
    quantile_99: float
    max_defect: float
    median_defect: float


def gaussian_fixed_point_check(
    bundle: PathBundle,
    t_list: Sequence[float],
    *,
    truncation: float = 16.0,
    quadrature_nodes: int = 64,
    control: bool = False,
) -> List[FixedPointReport]:
    """Pathwise defect of ``∫ v M^{θ^R,v}_t μ(dv) = B_{τ∧t} ∫ M^{θ^R,v}_t μ(dv)``.

    The defect is normalized by ``∫M μ(dv)·(|B_{τ∧t}| + √t)``. With ``control`` the
    weights use ``θ ≡ 0`` instead, for which the identity fails.
    """

    times = bundle.times
    stop = 1.0 - 1.0 / truncation
    nodes, weights = gauss_hermite(quadrature_nodes)
    brownian = bundle.brownian()
    dt = bundle.dt
    stop_index = int(np.searchsorted(times, stop + 1e-12, side="right")) - 1
    hit = np.abs(brownian[:, : stop_index + 1]) >= truncation
    first = np.where(hit.any(axis=1), np.argmax(hit, axis=1), stop_index)

    reports = []
    for t in t_list:
        if not 0.0 <= t <= stop + 1e-12:
            raise ValueError(f"t={t!r} must lie in [0, 1 - 1/R]")
        k = int(np.argmin(np.abs(times - t)))
        upto = np.minimum(first, k)
        rows = np.arange(bundle.num_paths)
        observed = brownian[rows, upto]
        if control:
            log_m = np.zeros((bundle.num_paths, nodes.size))
        else:
            active = np.arange(bundle.num_steps)[None, :] < upto[:, None]
            b_left = brownian[:, :-1]
            inv = 1.0 / (1.0 - times[:-1])
            log_m = np.empty((bundle.num_paths, nodes.size))
            for m, v in enumerate(nodes):
                theta = (v - b_left) * inv[None, :]
                step = np.where(active, theta * bundle.increments - 0.5 * theta * theta * dt[None, :], 0.0)
                log_m[:, m] = step.sum(axis=1)
        shifted = np.exp(log_m - log_m.max(axis=1, keepdims=True)) * weights[None, :]
        mass = shifted.sum(axis=1)
        left = shifted @ nodes
        defect = np.abs(left - observed * mass) / (mass * (np.abs(observed) + np.sqrt(max(t, 0.0))) + np.finfo(float).tiny)
        reports.append(
            FixedPointReport(
                t=float(times[k]),
                quantile_99=float(np.quantile(defect, 0.99)),
                max_defect=float(defect.max()),
                median_defect=float(np.median(defect)),
            )
        )
    return reports


def bridge_certificate(instance: BridgeInstance, *, threads: Optional[int] = None) -> EpsilonCertificate:
    """The truncated pair ``(P* = Q, θ^R)`` as an ε-certificate over quadrature types.

    Each Gauss-Hermite node is a type with its weight as prior; the gap of type
    ``v`` is ``½E|Q^{θ^R}_1 − v|²`` and ε₂ is the direct price-mismatch estimate.
    """

    nodes, weights = gauss_hermite(instance.quadrature_nodes)
    times = geometric_time_grid(instance.stop_time, instance.grid_steps)
    gaps = 0.5 * _stream(instance, times, lambda bundle: _terminal_gaps(instance, bundle, nodes), threads)
    per_type = gaps.mean(axis=0)
    per_type_se = gaps.std(axis=0, ddof=1) / np.sqrt(gaps.shape[0])
    pooled = gaps @ weights
    direct, direct_se, _, _, _ = _price_mismatch(instance, threads)
    eps2, eps2_se = _sqrt_se(direct, direct_se)
    sup = 0.5 * (nodes * nodes + 1.0)
    epsilon1 = float(pooled.mean())
    return EpsilonCertificate(
        epsilon1=epsilon1,
        epsilon1_se=float(pooled.std(ddof=1) / np.sqrt(pooled.size)),
        epsilon1_abs=epsilon1,
        epsilon2=eps2,
        epsilon2_se=eps2_se,
        per_type_gaps=[float(g) for g in per_type],
        per_type_gap_se=[float(s) for s in per_type_se],
        sup_values=[float(s) for s in sup],
        strategy_values=[float(s) for s in sup - per_type],
        dt=1.0 / instance.mismatch_steps,
        num_paths=instance.num_paths,
        seed=instance.seed,
        value_solver="bridge-closed-form",
    )
