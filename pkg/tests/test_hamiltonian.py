import math

import numpy as np
import pytest

from src.market.hamiltonian import Hamiltonian, cost_eval, ham_eval
from src.market.model import CostSpec


def test_sqrt_closed_form(oracle_constants):
    expected = oracle_constants["hamiltonian"]["sqrt_z1"]
    h_val, d_val = ham_eval(CostSpec(), expected["z"])
    assert h_val == pytest.approx(expected["H"], abs=1e-15)
    assert d_val == pytest.approx(expected["argmax"], abs=1e-15)
    assert ham_eval(CostSpec(), 0.0) == (1.0, 0.0)


@pytest.mark.parametrize("case", ["quadratic_z03", "quadratic_z2"])
def test_quadratic_clips_at_bound(oracle_constants, case):
    expected = oracle_constants["hamiltonian"][case]
    h_val, d_val = ham_eval(CostSpec(variant="quadratic", lam=1.0), expected["z"])
    assert h_val == pytest.approx(expected["H"], abs=1e-15)
    assert d_val == pytest.approx(expected["argmax"], abs=1e-15)


def test_tabulated_matches_closed_form():
    theta = np.linspace(-1.0, 1.0, 2001)
    spec = CostSpec(variant="tabulated", table_theta=tuple(theta), table_cost=tuple(-np.sqrt(1.0 - theta**2)))
    z = np.array([-2.0, -0.5, 0.0, 0.5, 2.0])
    h_val, d_val = Hamiltonian(spec).evaluate(z)
    assert h_val == pytest.approx(np.hypot(1.0, z), abs=1e-5)
    assert d_val == pytest.approx(z / np.hypot(1.0, z), abs=2e-3)


def test_tabulated_value_never_exceeds_piecewise_linear_sup():
    nodes = np.array([-1.0, -0.5, 0.0, 0.5, 1.0])
    spec = CostSpec(variant="tabulated", table_theta=tuple(nodes), table_cost=tuple(nodes**2))
    ham = Hamiltonian(spec)
    dense = np.linspace(-1.0, 1.0, 20001)
    z = np.array([-1.7, -0.3, 0.0, 0.3, 0.9, 2.5])
    h_val, d_val = ham.evaluate(z)
    brute = np.max(z[:, None] * dense[None, :] - np.interp(dense, nodes, nodes**2)[None, :], axis=1)
    assert h_val == pytest.approx(brute, abs=1e-12)
    assert d_val[3] == pytest.approx(0.15, abs=1e-12)
    for theta in (-0.8, -0.25, 0.0, 0.4, 1.0):
        assert np.all(ham.fenchel_gap(z, np.full_like(z, theta)) >= -1e-12)


def test_evaluate_preserves_shape():
    z = np.linspace(-3.0, 3.0, 12).reshape(3, 4)
    h_val, d_val = Hamiltonian(CostSpec()).evaluate(z)
    assert h_val.shape == (3, 4)
    assert np.all(np.abs(d_val) <= 1.0)


def test_fenchel_gap_is_nonnegative_and_vanishes_at_argmax():
    ham = Hamiltonian(CostSpec())
    z = np.linspace(-4.0, 4.0, 41)
    for theta in (-1.0, -0.3, 0.0, 0.8):
        assert np.all(ham.fenchel_gap(z, np.full_like(z, theta)) >= -1e-14)
    assert ham.fenchel_gap(z, ham.argmax(z)) == pytest.approx(np.zeros_like(z), abs=1e-14)


def test_cost_outside_interval_raises():
    with pytest.raises(ValueError):
        cost_eval(CostSpec(), 1.5)
    assert cost_eval(CostSpec(), 0.0) == -1.0


def test_non_finite_argument_raises():
    with pytest.raises(ValueError):
        Hamiltonian(CostSpec()).evaluate(np.array([0.0, math.inf]))


def test_lipschitz_constants():
    assert Hamiltonian(CostSpec()).lipschitz == 1.0
    assert Hamiltonian(CostSpec(variant="quadratic", lam=4.0)).lipschitz == 0.25


def test_growth_constant_of_tabulated_cost():
    spec = CostSpec(variant="tabulated", table_theta=(-1.0, 0.0, 1.0), table_cost=(1.0, 0.0, -0.5))
    assert spec.growth_constant == pytest.approx(0.5)
    assert CostSpec().growth_constant == 0.0
