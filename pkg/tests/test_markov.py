import numpy as np
import pytest

from src.market.model import Discretization
from src.solvers.fbsde import solve_fbsde
from src.verify.markov import MIN_PATHS, equilibrium_markov_inputs, markov_test, toy_sg_paths

PATHS = 5000


def _synthetic(auxiliary_weight: float, *, seed: int = 0):
    rng = np.random.default_rng(seed)
    times = np.array([0.0, 0.5, 1.0])
    state = rng.normal(size=PATHS)
    auxiliary = rng.normal(size=PATHS)
    following = state + 0.3 * state + auxiliary_weight * auxiliary + 0.1 * rng.normal(size=PATHS)
    price = np.column_stack([np.zeros(PATHS), state, following])
    aux = np.column_stack([np.zeros(PATHS), auxiliary, auxiliary])
    return price, aux, times


def test_dependent_increment_is_flagged():
    price, aux, times = _synthetic(0.5)
    report = markov_test(price, aux, times, 0.5, 0.5, min_paths=1000)
    assert report.verdict == "non-markov"
    assert report.coefficient == pytest.approx(0.5, abs=0.01)
    assert report.state_coefficient == pytest.approx(0.3, abs=0.01)


def test_independent_increment_is_consistent():
    price, aux, times = _synthetic(0.0)
    report = markov_test(price, aux, times, 0.5, 0.5, min_paths=1000)
    assert report.verdict == "markov-consistent"
    assert abs(report.z_score) < 4.0
    assert report.to_dict()["num_paths"] == PATHS


def test_affine_auxiliary_is_redundant():
    price, _, times = _synthetic(0.0)
    report = markov_test(price, 2.0 * price + 1.0, times, 0.5, 0.5, min_paths=1000)
    assert report.redundant
    assert report.verdict == "markov-consistent"
    assert report.z_score == 0.0


def test_argument_errors():
    price, aux, times = _synthetic(0.0)
    with pytest.raises(ValueError):
        markov_test(price, aux, times, 0.5, 0.5)
    with pytest.raises(ValueError):
        markov_test(price, aux, times, 0.25, 0.5, min_paths=1000)
    with pytest.raises(ValueError):
        markov_test(price, aux, times, 0.5, 0.75, min_paths=1000)
    with pytest.raises(ValueError):
        markov_test(price[:, :2], aux, times, 0.5, 0.5, min_paths=1000)
    with pytest.raises(ValueError):
        markov_test(np.zeros_like(price), aux, times, 0.5, 0.5, min_paths=1000)
    assert MIN_PATHS == 100_000


@pytest.mark.slow
@pytest.mark.parametrize("seed", [42, 43, 44, 45, 46])
def test_toy_price_is_not_markov(seed):
    disc = Discretization(num_steps=40, num_paths=MIN_PATHS, seed=seed)
    price, auxiliary, times = toy_sg_paths(disc, 1.0)
    report = markov_test(price, auxiliary, times, 0.9, 0.1)
    assert report.verdict == "non-markov"
    assert abs(report.z_score) > 6.0
    assert report.coefficient == pytest.approx(-0.1, rel=0.2)

    control = markov_test(price - auxiliary, auxiliary, times, 0.9, 0.1)
    assert control.verdict == "markov-consistent"
    assert abs(control.z_score) < 4.0


def test_two_type_equilibrium_price_is_markov(canonical_model):
    disc = Discretization(num_steps=8, num_paths=3000, simplex_grid=41, seed=5)
    solution = solve_fbsde(canonical_model, disc, "grid")
    price, auxiliary = equilibrium_markov_inputs(solution)
    assert auxiliary.shape == price.shape
    report = markov_test(price, auxiliary, solution.path.times, 0.125, 0.0625, min_paths=1000)
    assert report.redundant
    assert abs(report.z_score) < 4.0
    assert report.verdict == "markov-consistent"
