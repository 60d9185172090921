import numpy as np
import pytest

from src.market.model import Discretization
from src.sim.paths import PathBundle, gen_paths, girsanov_weight, log_girsanov_weights, path_generator
from src.utils.parallel import block_ranges, map_blocks, resolve_threads, set_default_threads


def test_paths_are_deterministic_and_thread_independent():
    disc = Discretization(num_steps=8, num_paths=5000, seed=123)
    first = gen_paths(disc, 1.0, threads=1)
    second = gen_paths(disc, 1.0, threads=4)
    assert np.array_equal(first.increments, second.increments)


def test_window_reproduces_rows_of_full_bundle():
    disc = Discretization(num_steps=6, num_paths=20, seed=9)
    full = gen_paths(disc, 0.5)
    window = gen_paths(disc, 0.5, start=5, count=3)
    assert window.start == 5
    assert np.array_equal(window.increments, full.increments[5:8])


def test_different_seeds_differ():
    a = gen_paths(Discretization(num_steps=4, num_paths=10, seed=1))
    b = gen_paths(Discretization(num_steps=4, num_paths=10, seed=2))
    assert not np.allclose(a.increments, b.increments)


def test_path_generator_is_keyed_by_seed_and_index():
    assert path_generator(7, 3).standard_normal() == path_generator(7, 3).standard_normal()
    assert path_generator(7, 3).standard_normal() != path_generator(7, 4).standard_normal()


def test_increment_variance_matches_step():
    disc = Discretization(num_steps=4, num_paths=20000, seed=5)
    bundle = gen_paths(disc, 2.0)
    assert bundle.dt == pytest.approx(np.full(4, 0.5))
    assert np.var(bundle.increments, axis=0) == pytest.approx(np.full(4, 0.5), rel=0.05)


def test_custom_time_grid():
    times = np.array([0.0, 0.1, 0.5, 0.9])
    bundle = gen_paths(Discretization(num_paths=3), times=times)
    assert bundle.num_steps == 3
    assert bundle.horizon == pytest.approx(0.9)


def test_coarsen_keeps_brownian_path():
    bundle = gen_paths(Discretization(num_steps=12, num_paths=50, seed=4), 1.0)
    coarse = bundle.coarsen(3)
    assert coarse.num_steps == 4
    assert np.allclose(coarse.brownian(), bundle.brownian()[:, ::3])
    assert bundle.coarsen(1) is bundle
    with pytest.raises(ValueError):
        bundle.coarsen(5)


def test_bundle_validation():
    with pytest.raises(ValueError):
        PathBundle(increments=np.zeros((2, 3)), times=np.linspace(0.0, 1.0, 3))
    with pytest.raises(ValueError):
        PathBundle(increments=np.zeros((2, 2)), times=np.array([0.0, 0.5, 0.5]))


def test_girsanov_weights_have_unit_mean():
    disc = Discretization(num_steps=10, num_paths=20000, seed=21)
    bundle = gen_paths(disc, 1.0)
    log_m = log_girsanov_weights(0.5, bundle.increments, bundle.dt)
    assert log_m.shape == (20000, 11)
    assert np.all(log_m[:, 0] == 0.0)
    assert np.mean(np.exp(log_m[:, -1])) == pytest.approx(1.0, abs=0.02)


def test_single_path_weight_matches_bulk():
    bundle = gen_paths(Discretization(num_steps=5, num_paths=4, seed=2), 1.0)
    bulk = np.exp(log_girsanov_weights(0.3, bundle.increments, bundle.dt))
    assert girsanov_weight(0.3, bundle, 2) == pytest.approx(bulk[2])


def test_block_ranges_and_ordered_map():
    assert block_ranges(5, 2) == [(0, 2), (2, 4), (4, 5)]
    assert map_blocks(lambda lo, hi: hi - lo, block_ranges(10, 3), threads=3) == [3, 3, 3, 1]
    with pytest.raises(ValueError):
        block_ranges(5, 0)


def test_default_threads():
    set_default_threads(2)
    try:
        assert resolve_threads(None) == 2
        assert resolve_threads(5) == 5
        assert resolve_threads(0) >= 1
    finally:
        set_default_threads(0)
    with pytest.raises(ValueError):
        set_default_threads(-1)
