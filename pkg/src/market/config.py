"""Config document ingestion for market models.

Documents are YAML (JSON is accepted as a subset). The model keys sit at the top
level; ``discretization`` and ``solver`` are optional sections::

    N: 2
    v: [1.0, -1.0]
    p: [0.5, 0.5]
    T: 0.25
    cost: sqrt_closed_form
    discretization: {num_steps: 64, num_paths: 10000, seed: 42}
"""

from __future__ import annotations

import logging
import os
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, List, Literal, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .model import CostSpec, Discretization, MarketModel, SolverSettings, normalize_prior

LOGGER = logging.getLogger(__name__)

__all__ = [
    "ConfigError",
    "LoadedConfig",
    "RuntimeSettings",
    "dump_model",
    "load_model",
    "load_model_file",
    "load_runtime_settings",
]


class ConfigError(ValueError):
    """Raised when a config document cannot be turned into a model."""


# ----- Document schema -----


class _CostDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    variant: Literal["sqrt_closed_form", "quadratic", "tabulated"]
    lam: Optional[float] = Field(default=None, gt=0.0)
    theta: Optional[List[float]] = None
    f: Optional[List[float]] = None

    @model_validator(mode="after")
    def _check_variant_parameters(self) -> "_CostDocument":
        if self.variant == "quadratic" and self.lam is None:
            raise ValueError("quadratic cost requires lam")
        if self.variant == "tabulated":
            if self.theta is None or self.f is None:
                raise ValueError("tabulated cost requires theta and f tables")
            if len(self.theta) < 3:
                raise ValueError("tabulated cost needs at least 3 grid points")
            if len(self.theta) != len(self.f):
                raise ValueError("theta and f tables differ in length")
        return self


class _DiscretizationDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    num_steps: int = Field(default=64, ge=1)
    num_paths: int = Field(default=10_000, ge=1)
    simplex_grid: int = Field(default=201, ge=2)
    seed: int = Field(default=42, ge=0, lt=2**64)
    basis_degree: int = Field(default=3, ge=1)


class _SolverDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    picard_tol: float = Field(default=1e-8, gt=0.0)
    picard_max_iter: int = Field(default=60, ge=1)
    damping: float = Field(default=0.0, ge=0.0, lt=1.0)
    inner_tol: float = Field(default=1e-10, gt=0.0)
    inner_max_iter: int = Field(default=200, ge=1)
    inner_damping: float = Field(default=0.5, gt=0.0, le=1.0)
    scheme: Literal["semi_implicit", "explicit"] = "semi_implicit"


class _ModelDocument(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    num_types: int = Field(alias="N", ge=1)
    values: List[float] = Field(alias="v")
    prior: List[float] = Field(alias="p")
    horizon: float = Field(alias="T", gt=0.0)
    cost: Union[Literal["sqrt_closed_form"], _CostDocument] = "sqrt_closed_form"
    action_bound: Optional[float] = Field(default=None, gt=0.0)
    discretization: _DiscretizationDocument = Field(default_factory=_DiscretizationDocument)
    solver: _SolverDocument = Field(default_factory=_SolverDocument)

    @field_validator("values")
    @classmethod
    def _distinct_values(cls, values: List[float]) -> List[float]:
        if len(set(values)) != len(values):
            raise ValueError("duplicate values")
        return values

    @field_validator("prior")
    @classmethod
    def _positive_prior(cls, prior: List[float]) -> List[float]:
        if any(not weight > 0.0 for weight in prior):
            raise ValueError("prior weights must be positive")
        return prior

    @model_validator(mode="after")
    def _check_lengths(self) -> "_ModelDocument":
        if len(self.values) != self.num_types:
            raise ValueError(f"v has {len(self.values)} entries but N={self.num_types}")
        if len(self.prior) != self.num_types:
            raise ValueError(f"p has {len(self.prior)} entries but N={self.num_types}")
        return self


# ----- Public API -----


@dataclass(frozen=True)
class LoadedConfig:
    model: MarketModel
    discretization: Discretization
    solver: SolverSettings

    def __iter__(self):
        return iter((self.model, self.discretization, self.solver))


def _format_validation_error(exc: ValidationError) -> str:
    lines = []
    for error in exc.errors():
        path = ".".join(str(part) for part in error.get("loc", ()) if part != "__root__")
        message = error.get("msg", "invalid value")
        if message.startswith("Value error, "):
            message = message[len("Value error, ") :]
        lines.append(f"{path or '<document>'}: {message}")
    return "; ".join(lines)


def _build_cost(document: _ModelDocument) -> CostSpec:
    cost = document.cost
    if cost == "sqrt_closed_form" or (isinstance(cost, _CostDocument) and cost.variant == "sqrt_closed_form"):
        if document.action_bound not in (None, 1.0):
            raise ConfigError("action_bound: sqrt_closed_form cost fixes the action interval to [-1, 1]")
        return CostSpec(variant="sqrt_closed_form", action_bound=1.0)
    assert isinstance(cost, _CostDocument)
    if cost.variant == "quadratic":
        return CostSpec(variant="quadratic", action_bound=document.action_bound or 1.0, lam=cost.lam)
    bound = document.action_bound if document.action_bound is not None else max(abs(cost.theta[0]), abs(cost.theta[-1]))
    return CostSpec(
        variant="tabulated",
        action_bound=float(bound),
        table_theta=tuple(float(t) for t in cost.theta),
        table_cost=tuple(float(c) for c in cost.f),
    )


def load_model(config_text: str) -> LoadedConfig:
    """Parse and validate a config document.

    Raises :class:`ConfigError` with the offending key path on any failure.
    """

    try:
        raw = yaml.safe_load(config_text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"<document>: parse failure: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("<document>: expected a mapping at the top level")
    try:
        document = _ModelDocument.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(_format_validation_error(exc)) from exc

    try:
        cost = _build_cost(document)
        prior = normalize_prior(document.prior)
        model = MarketModel(
            values=tuple(float(v) for v in document.values),
            prior=prior,
            horizon=float(document.horizon),
            cost=cost,
        )
        disc = Discretization(**document.discretization.model_dump())
        solver = SolverSettings(**document.solver.model_dump())
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    LOGGER.debug("Loaded model N=%d T=%s cost=%s", model.num_types, model.horizon, cost.variant)
    return LoadedConfig(model=model, discretization=disc, solver=solver)


def load_model_file(path: str | Path) -> LoadedConfig:
    config_path = Path(path)
    if not config_path.exists():
        raise FileNotFoundError(f"Config file not found: {config_path}")
    return load_model(config_path.read_text(encoding="utf-8"))


def dump_model(
    model: MarketModel,
    disc: Discretization | None = None,
    solver: SolverSettings | None = None,
) -> str:
    """Serialize back to a document that :func:`load_model` reproduces bit-for-bit."""

    cost = model.cost
    if cost.variant == "sqrt_closed_form":
        cost_doc: Any = "sqrt_closed_form"
    elif cost.variant == "quadratic":
        cost_doc = {"variant": "quadratic", "lam": float(cost.lam)}
    else:
        cost_doc = {"variant": "tabulated", "theta": list(cost.table_theta), "f": list(cost.table_cost)}
    document: dict[str, Any] = {
        "N": model.num_types,
        "v": [float(v) for v in model.values],
        "p": [float(p) for p in model.prior],
        "T": float(model.horizon),
        "cost": cost_doc,
    }
    if cost.variant != "sqrt_closed_form":
        document["action_bound"] = float(cost.action_bound)
    if disc is not None:
        document["discretization"] = asdict(disc)
    if solver is not None:
        document["solver"] = asdict(solver)
    return yaml.safe_dump(document, sort_keys=False)


# ----- Runtime settings from the environment -----


@dataclass(frozen=True)
class RuntimeSettings:
    output_root: Path
    threads: int


def _parse_optional_int(value: str | None, name: str) -> int | None:
    if value is None or value.strip() == "":
        return None
    try:
        return int(value)
    except ValueError as exc:
        raise ValueError(f"Invalid integer for {name}: {value!r}") from exc


def load_runtime_settings() -> RuntimeSettings:
    """Read ``KYLEBACK_OUTPUT_ROOT`` and ``KYLEBACK_THREADS``."""

    root = os.getenv("KYLEBACK_OUTPUT_ROOT", "artifacts")
    threads = _parse_optional_int(os.getenv("KYLEBACK_THREADS"), "KYLEBACK_THREADS")
    if threads is not None and threads < 0:
        raise ValueError("KYLEBACK_THREADS must be >= 0")
    return RuntimeSettings(output_root=Path(root), threads=threads or 0)
