"""Shared fixtures; also puts the repository root on ``sys.path``."""

from __future__ import annotations

import sys
from pathlib import Path

import pytest
import yaml

ROOT = Path(__file__).resolve().parents[1]


def _ensure_project_on_path() -> None:
    if str(ROOT) not in sys.path:
        sys.path.insert(0, str(ROOT))


_ensure_project_on_path()

from src.market.model import CostSpec, Discretization, MarketModel  # noqa: E402
from src.utils.metrics import metrics  # noqa: E402


@pytest.fixture(scope="session")
def oracle_constants() -> dict:
    with (ROOT / "tests" / "fixtures" / "oracle_constants.yaml").open(encoding="utf-8") as handle:
        return yaml.safe_load(handle)


@pytest.fixture
def canonical_model() -> MarketModel:
    return MarketModel(values=(1.0, -1.0), prior=(0.5, 0.5), horizon=0.25)


@pytest.fixture
def single_type_model() -> MarketModel:
    return MarketModel(values=(1.0,), prior=(1.0,), horizon=1.0)


@pytest.fixture
def quadratic_model() -> MarketModel:
    return MarketModel(values=(1.0, -1.0), prior=(0.5, 0.5), horizon=0.25, cost=CostSpec(variant="quadratic", lam=1.0))


@pytest.fixture
def small_disc() -> Discretization:
    return Discretization(num_steps=16, num_paths=2000, simplex_grid=41, seed=11)


@pytest.fixture
def config_dir() -> Path:
    return ROOT / "config"


@pytest.fixture(autouse=True)
def _reset_metrics():
    metrics.reset()
    yield
    metrics.reset()
