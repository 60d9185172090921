import math

import numpy as np
import pytest

from src.market.model import CostSpec, MarketModel
from src.oracles.reference import (
    FIXED_POINT_MAX_ITER,
    FixedPointOracleError,
    cost_closure,
    oracle_bridge_moments,
    oracle_hamiltonian,
    oracle_onestep_equilibrium,
)


def test_hamiltonian_oracle_sqrt_cost(oracle_constants):
    expected = oracle_constants["hamiltonian"]["sqrt_z1"]
    cost, interval = cost_closure(CostSpec())
    result = oracle_hamiltonian(cost, interval, expected["z"])
    assert result.method == "grid_sup"
    assert result["H"] == pytest.approx(math.sqrt(2.0), abs=1e-8)
    assert result["argmax"] == pytest.approx(1.0 / math.sqrt(2.0), abs=1e-6)


def test_hamiltonian_oracle_linear_objective(oracle_constants):
    expected = oracle_constants["hamiltonian"]["zero_cost_z2"]
    result = oracle_hamiltonian(lambda theta: np.zeros_like(theta), (-1.0, 1.0), expected["z"])
    assert result["H"] == pytest.approx(expected["H"], abs=1e-12)
    assert result["argmax"] == pytest.approx(expected["argmax"], abs=1e-12)


@pytest.mark.parametrize("case", ["quadratic_z03", "quadratic_z2"])
def test_hamiltonian_oracle_quadratic(oracle_constants, case):
    expected = oracle_constants["hamiltonian"][case]
    cost, interval = cost_closure(CostSpec(variant="quadratic", lam=1.0))
    result = oracle_hamiltonian(cost, interval, expected["z"])
    assert result["H"] == pytest.approx(expected["H"], abs=1e-9)
    assert result["argmax"] == pytest.approx(expected["argmax"], abs=1e-6)


def test_onestep_single_type_is_dt(oracle_constants):
    expected = oracle_constants["onestep_equilibrium"]["single_type"]
    model = MarketModel(values=(1.0,), prior=(1.0,), horizon=expected["dt"])
    result = oracle_onestep_equilibrium(model, expected["dt"])
    assert result["y0"] == pytest.approx(expected["y0"], abs=1e-12)


def test_onestep_canonical_matches_frozen_constants(oracle_constants, canonical_model):
    expected = oracle_constants["onestep_equilibrium"]["canonical_n2"]
    result = oracle_onestep_equilibrium(canonical_model, expected["dt"])
    assert result.method == "binomial_fixed_point"
    assert result["y0"] == pytest.approx(expected["y0"], abs=1e-10)
    assert result["theta0"] == pytest.approx(expected["theta0"], abs=1e-6)
    assert result["price0"] == pytest.approx(expected["price0"], abs=1e-15)
    for got, want in zip(result["successors"], expected["successors"]):
        assert got == pytest.approx(want, abs=1e-6)


def test_onestep_canonical_symmetry(canonical_model):
    result = oracle_onestep_equilibrium(canonical_model, 0.25)
    y0 = result["y0"]
    assert y0[0] == pytest.approx(y0[1], abs=1e-14)
    assert result["theta0"][0] == pytest.approx(-result["theta0"][1], abs=1e-12)


def test_onestep_successors_feed_the_fixed_point():
    model = MarketModel(values=(1.0, -1.0), prior=(0.5, 0.5), horizon=0.25, cost=CostSpec(variant="quadratic", lam=1.0))
    result = oracle_onestep_equilibrium(model, 0.25, terminal=lambda states: 0.5 * states)
    assert result["theta0"] == [1.0, -1.0]
    assert result["successors"] == pytest.approx([[0.75, 0.25], [0.25, 0.75]], abs=1e-15)
    assert result["z0"] == pytest.approx([0.25, -0.25], abs=1e-15)
    assert result["y0"] == pytest.approx([0.4375, 0.4375], abs=1e-12)
    assert result["iterations"] == 3


def test_onestep_oscillating_terminal_raises():
    model = MarketModel(values=(1.0, -1.0), prior=(0.5, 0.5), horizon=0.25, cost=CostSpec(variant="quadratic", lam=1.0))
    with pytest.raises(FixedPointOracleError):
        oracle_onestep_equilibrium(model, 0.25, terminal=lambda states: -40.0 * states, max_iter=20)


def test_onestep_rejects_large_support():
    model = MarketModel(values=(1.0, 2.0, 3.0, 4.0, 5.0), prior=(0.2, 0.2, 0.2, 0.2, 0.2), horizon=1.0)
    with pytest.raises(ValueError):
        oracle_onestep_equilibrium(model, 0.1)
    assert FIXED_POINT_MAX_ITER == 10_000


@pytest.mark.parametrize("case", ["v1_t05", "v0_t05"])
def test_bridge_moments(oracle_constants, case):
    expected = oracle_constants["bridge_moments"][case]
    result = oracle_bridge_moments(expected["v"], expected["t"])
    assert result["mean"] == pytest.approx(expected["mean"])
    assert result["second_moment"] == pytest.approx(expected["second_moment"])


def test_bridge_moments_at_time_zero():
    result = oracle_bridge_moments(2.0, 0.0)
    assert result["mean"] == pytest.approx(-2.0)
    assert result["second_moment"] == pytest.approx(4.0)
