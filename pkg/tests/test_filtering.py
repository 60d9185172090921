import numpy as np
import pytest

from src.market.model import Discretization, MarketModel
from src.sim.filtering import filter_exact, filter_sde, write_path_dump
from src.sim.paths import gen_paths
from src.sim.strategies import ConstantStrategy, OpenLoopStrategy, ShiftedStrategy


@pytest.fixture
def bundle():
    return gen_paths(Discretization(num_steps=512, num_paths=400, seed=3), 0.25)


def test_zero_strategy_leaves_prior_unchanged(canonical_model, bundle):
    strategy = ConstantStrategy((0.0, 0.0))
    for path in (filter_exact(canonical_model, strategy, bundle), filter_sde(canonical_model, strategy, bundle)):
        assert np.allclose(path.state, 0.5)
        assert np.allclose(path.price, 0.0)
        assert path.clip_events == 0


def test_exact_filter_matches_logistic_closed_form(canonical_model, bundle):
    path = filter_exact(canonical_model, ConstantStrategy((1.0, -1.0)), bundle)
    expected = 1.0 / (1.0 + np.exp(-2.0 * path.brownian))
    assert path.state[:, :, 0] == pytest.approx(expected, abs=1e-12)
    assert np.allclose(path.state.sum(axis=2), 1.0)


def test_euler_filter_tracks_exact_filter(canonical_model, bundle):
    strategy = ConstantStrategy((1.0, -1.0))
    exact = filter_exact(canonical_model, strategy, bundle)
    euler = filter_sde(canonical_model, strategy, bundle)
    assert float(np.mean(np.abs(exact.state[:, -1, 0] - euler.state[:, -1, 0]))) < 0.03
    assert euler.max_sum_defect < 1e-12
    assert np.all(euler.price <= 1.0) and np.all(euler.price >= -1.0)


def test_log_weights_follow_rates(canonical_model, bundle):
    path = filter_sde(canonical_model, ConstantStrategy((0.5, -0.5)), bundle)
    expected = 0.5 * path.brownian - 0.125 * path.times[None, :]
    assert path.log_weights[:, :, 0] == pytest.approx(expected, abs=1e-10)


def test_open_loop_and_shifted_strategies(canonical_model):
    bundle = gen_paths(Discretization(num_steps=4, num_paths=3, seed=1), 0.25)
    rates = np.full((3, 4, 2), 0.2)
    path = filter_sde(canonical_model, OpenLoopStrategy(rates), bundle)
    assert np.allclose(path.rates, 0.2)

    shifted = ShiftedStrategy(ConstantStrategy((0.9, -0.9)), 0.5, 1.0)
    assert shifted.evaluate(0, np.full((2, 2), 0.5)) == pytest.approx(np.array([[1.0, -0.4], [1.0, -0.4]]))


def test_strategy_outside_bound_is_rejected(canonical_model, bundle):
    with pytest.raises(ValueError):
        filter_sde(canonical_model, ConstantStrategy((1.5, 0.0)), bundle)
    with pytest.raises(ValueError):
        filter_exact(canonical_model, ConstantStrategy((0.1, 0.1, 0.1)), bundle)


def test_single_type_filter_is_trivial(single_type_model):
    bundle = gen_paths(Discretization(num_steps=8, num_paths=10, seed=1), 1.0)
    path = filter_sde(single_type_model, ConstantStrategy((0.0,)), bundle)
    assert np.all(path.state == 1.0)
    assert np.all(path.price == 1.0)


def test_path_dump_layout(canonical_model, tmp_path):
    bundle = gen_paths(Discretization(num_steps=4, num_paths=5, seed=1), 0.25)
    path = filter_sde(canonical_model, ConstantStrategy((1.0, -1.0)), bundle)
    dest = write_path_dump(path, tmp_path / "paths.csv", max_paths=2)
    lines = dest.read_text(encoding="utf-8").strip().splitlines()
    assert lines[0] == "path,step,t,B,X_1,X_2,P,M_1,M_2"
    assert len(lines) == 1 + 2 * 5


def test_euler_filter_error_shrinks_with_the_step(canonical_model):
    fine = gen_paths(Discretization(num_steps=1024, num_paths=2000, seed=8), 1.0)
    strategy = ConstantStrategy((0.5, -0.5))
    errors = []
    for factor in (32, 16, 8, 4, 2, 1):
        bundle = fine.coarsen(factor)
        exact = filter_exact(canonical_model, strategy, bundle)
        euler = filter_sde(canonical_model, strategy, bundle)
        errors.append(float(np.sqrt(np.mean((euler.state[:, -1, :] - exact.state[:, -1, :]) ** 2))))
    assert all(coarse > finer for coarse, finer in zip(errors, errors[1:]))
