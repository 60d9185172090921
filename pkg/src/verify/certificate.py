"""ε-equilibrium certificates and set-value membership sampling."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..io.artifacts import write_json
from ..market.model import Discretization, MarketModel, SolverSettings
from ..sim.filtering import FilterPath, filter_exact, filter_sde
from ..sim.paths import PathBundle, gen_paths
from ..sim.strategies import FeedbackStrategy
from ..solvers.bsde import (
    PriceMap,
    bsde_solve_grid,
    bsde_solve_regress,
    constant_price_map,
    filter_price_map,
    value_of_strategy,
)
from ..solvers.fbsde import EquilibriumSolution
from ..utils.schema_validation import validate_certificate

LOGGER = logging.getLogger(__name__)

_NOISE_SIGMAS = 3.0
_MAX_GRID_TYPES = 3

__all__ = [
    "ConstantPrice",
    "EpsilonCertificate",
    "FilterPrice",
    "PathPrice",
    "PriceRule",
    "SetValueSample",
    "certify",
    "certify_solution",
    "setvalue_probe",
]


@dataclass(frozen=True)
class ConstantPrice:
    level: float


@dataclass(frozen=True)
class PathPrice:
    """Price per path, shape (paths, K+1), aligned with the certifying bundle."""

    values: np.ndarray


@dataclass(frozen=True)
class FilterPrice:
    """``P = Σ v_i X_i`` where ``X`` is the filter-SDE state under ``strategy``."""

    strategy: FeedbackStrategy


PriceRule = Union[ConstantPrice, PathPrice, FilterPrice]


@dataclass
class EpsilonCertificate:
    """Strategy suboptimality ``ε₁`` and price mismatch ``ε₂`` of a (P, θ) pair."""

    epsilon1: float
    epsilon1_se: float
    epsilon1_abs: float
    epsilon2: float
    epsilon2_se: float
    per_type_gaps: List[float]
    per_type_gap_se: List[float]
    sup_values: List[float]
    strategy_values: List[float]
    dt: float
    num_paths: int
    seed: int
    value_solver: str = "grid"

    @property
    def epsilon(self) -> float:
        return max(self.epsilon1_abs, self.epsilon2)

    @property
    def verdicts(self) -> Dict[str, bool]:
        return {
            "epsilon1_within_noise": bool(self.epsilon1 >= -_NOISE_SIGMAS * self.epsilon1_se),
            "epsilon2_nonnegative": bool(self.epsilon2 >= 0.0),
        }

    def to_dict(self) -> Dict[str, object]:
        return {
            "epsilon1": self.epsilon1,
            "epsilon1_se": self.epsilon1_se,
            "epsilon1_abs": self.epsilon1_abs,
            "epsilon2": self.epsilon2,
            "epsilon2_se": self.epsilon2_se,
            "epsilon": self.epsilon,
            "per_type_gaps": list(self.per_type_gaps),
            "per_type_gap_se": list(self.per_type_gap_se),
            "sup_values": list(self.sup_values),
            "strategy_values": list(self.strategy_values),
            "dt": self.dt,
            "num_paths": self.num_paths,
            "seed": self.seed,
            "value_solver": self.value_solver,
            "verdicts": self.verdicts,
        }

    def to_json(self, destination: Path) -> Path:
        payload = self.to_dict()
        validate_certificate(payload)
        return write_json(destination, payload)

    def summary_line(self) -> str:
        return (
            f"eps1={self.epsilon1:.6g} (se {self.epsilon1_se:.2g}), eps1_abs={self.epsilon1_abs:.6g}, "
            f"eps2={self.epsilon2:.6g} (se {self.epsilon2_se:.2g}), eps={self.epsilon:.6g}"
        )


def _market_path(model: MarketModel, rule: PriceRule, strategy: FeedbackStrategy, bundle: PathBundle) -> FilterPath:
    market = rule.strategy if isinstance(rule, FilterPrice) else strategy
    return filter_sde(model, market, bundle)


def _price_paths(model: MarketModel, rule: PriceRule, market: FilterPath, bundle: PathBundle) -> np.ndarray:
    shape = (bundle.num_paths, bundle.num_steps + 1)
    if isinstance(rule, ConstantPrice):
        return np.full(shape, float(rule.level))
    if isinstance(rule, PathPrice):
        values = np.asarray(rule.values, dtype=float)
        if values.shape != shape:
            raise ValueError(f"path price has shape {values.shape}, expected {shape}")
        return values
    return market.price


def _price_map(model: MarketModel, rule: PriceRule) -> Optional[PriceMap]:
    if isinstance(rule, ConstantPrice):
        return constant_price_map(rule.level)
    if isinstance(rule, FilterPrice):
        return filter_price_map(model)
    return None


def _sup_values(
    model: MarketModel,
    rule: PriceRule,
    strategy: FeedbackStrategy,
    disc: Discretization,
    market: FilterPath,
    price: np.ndarray,
    bundle: PathBundle,
    settings: Optional[SolverSettings],
) -> Tuple[np.ndarray, np.ndarray, str]:
    price_map = _price_map(model, rule)
    if price_map is not None and model.num_types <= _MAX_GRID_TYPES:
        grid_disc = disc.replace(num_steps=bundle.num_steps)
        market_strategy = rule.strategy if isinstance(rule, FilterPrice) else strategy
        surface = bsde_solve_grid(model, price_map, grid_disc, market_strategy=market_strategy, settings=settings)
        return surface.y0, np.zeros(model.num_types), "grid"
    surface = bsde_solve_regress(model, market, bundle, basis_degree=disc.basis_degree, price=price)
    return surface.y0, surface.y0_se, "regress"


def certify(
    model: MarketModel,
    price: PriceRule | float,
    strategy: FeedbackStrategy,
    disc: Discretization,
    *,
    bundle: Optional[PathBundle] = None,
    settings: Optional[SolverSettings] = None,
) -> EpsilonCertificate:
    """Certify ``(P, θ)``.

    ``ε₁ = Σ p_i [Y^{P,i}_0 − J(P; v_i, θ^i)]`` where the supremum ``Y^{P,i}_0`` comes
    from the grid BSDE for N <= 3 with a Markov price, otherwise from regression;
    ``ε₂² = E[Σ_k |P_k − P^θ_k|² Δt_k]`` against the exact filter of ``θ``.
    """

    rule: PriceRule = ConstantPrice(float(price)) if isinstance(price, (int, float)) else price
    if bundle is None:
        bundle = gen_paths(disc, model.horizon)
    market = _market_path(model, rule, strategy, bundle)
    price_paths = _price_paths(model, rule, market, bundle)

    shares_state = not isinstance(rule, FilterPrice) or rule.strategy is strategy
    insider = market if shares_state else filter_sde(model, strategy, bundle)
    values = []
    value_se = []
    for i, v_i in enumerate(model.values):
        estimate, se = value_of_strategy(model, v_i, price_paths, insider.rates[:, :, i], bundle)
        values.append(estimate)
        value_se.append(se)
    sup, sup_se, solver = _sup_values(model, rule, strategy, disc, market, price_paths, bundle, settings)

    gaps = sup - np.asarray(values)
    gap_se = np.sqrt(np.asarray(value_se) ** 2 + np.asarray(sup_se) ** 2)
    p = model.p
    epsilon1 = float(np.dot(p, gaps))
    epsilon1_se = float(np.sqrt(np.sum((p * gap_se) ** 2)))
    epsilon1_abs = float(np.dot(p, np.abs(gaps)))

    exact = filter_exact(model, strategy, bundle)
    mismatch = np.sum((price_paths[:, :-1] - exact.price[:, :-1]) ** 2 * bundle.dt[None, :], axis=1)
    mean_sq = float(mismatch.mean())
    epsilon2 = float(np.sqrt(mean_sq))
    sq_se = float(mismatch.std(ddof=1) / np.sqrt(mismatch.size)) if mismatch.size > 1 else 0.0
    epsilon2_se = sq_se / (2.0 * epsilon2) if epsilon2 > 0.0 else 0.0

    certificate = EpsilonCertificate(
        epsilon1=epsilon1,
        epsilon1_se=epsilon1_se,
        epsilon1_abs=epsilon1_abs,
        epsilon2=epsilon2,
        epsilon2_se=epsilon2_se,
        per_type_gaps=[float(g) for g in gaps],
        per_type_gap_se=[float(s) for s in gap_se],
        sup_values=[float(s) for s in sup],
        strategy_values=[float(j) for j in values],
        dt=float(bundle.dt.max()),
        num_paths=bundle.num_paths,
        seed=bundle.seed,
        value_solver=solver,
    )
    if not certificate.verdicts["epsilon1_within_noise"]:
        LOGGER.warning("eps1=%.3e is negative beyond %.0f SE", epsilon1, _NOISE_SIGMAS)
    LOGGER.info("Certificate: %s", certificate.summary_line())
    return certificate


def certify_solution(solution: EquilibriumSolution, *, bundle: Optional[PathBundle] = None) -> EpsilonCertificate:
    """Certify an equilibrium solution's own pair ``(Σ v X^{θ*}, θ*)``."""

    strategy = solution.strategy
    return certify(
        solution.model,
        FilterPrice(strategy),
        strategy,
        solution.disc,
        bundle=bundle,
        settings=solution.settings,
    )


@dataclass(frozen=True)
class SetValueSample:
    candidate: Tuple[float, ...]
    level: float
    certified_epsilon: float
    gap: float
    member: bool = field(default=False)

    def to_dict(self) -> Dict[str, object]:
        return {
            "candidate": list(self.candidate),
            "level": self.level,
            "certified_epsilon": self.certified_epsilon,
            "gap": self.gap,
            "member": self.member,
        }


def setvalue_probe(
    model: MarketModel,
    candidates: Sequence[Sequence[float]],
    pairs: Sequence[EpsilonCertificate | Tuple[PriceRule, FeedbackStrategy]],
    levels: Sequence[float],
    *,
    disc: Optional[Discretization] = None,
    bundle: Optional[PathBundle] = None,
) -> List[SetValueSample]:
    """Membership of each candidate ``y`` in the ε-set value, per certified pair and level.

    The gap is ``Σ p_i |y_i − J(P; v_i, θ^i)|``; ``y`` is a member at level ε when the
    gap and the pair's certified ε are both at most ε.
    """

    certificates = []
    for pair in pairs:
        if isinstance(pair, EpsilonCertificate):
            certificates.append(pair)
            continue
        if disc is None:
            raise ValueError("disc is required to certify (price, strategy) pairs")
        rule, strategy = pair
        certificates.append(certify(model, rule, strategy, disc, bundle=bundle))

    p = model.p
    samples = []
    for candidate in candidates:
        y = np.asarray(candidate, dtype=float)
        if y.shape != (model.num_types,):
            raise ValueError(f"candidate {candidate!r} does not have N={model.num_types} entries")
        for certificate in certificates:
            gap = float(np.dot(p, np.abs(y - np.asarray(certificate.strategy_values))))
            for level in levels:
                member = gap <= level and certificate.epsilon <= level
                samples.append(SetValueSample(tuple(float(c) for c in y), float(level), certificate.epsilon, gap, member))
    return samples
