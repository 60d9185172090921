import json
import math

import jsonschema
import numpy as np
import pytest

from src.market.model import Discretization, MarketModel
from src.sim.paths import gen_paths
from src.sim.strategies import ConstantStrategy
from src.solvers.fbsde import solve_fbsde
from src.verify.certificate import (
    ConstantPrice,
    FilterPrice,
    PathPrice,
    certify,
    certify_solution,
    setvalue_probe,
)


@pytest.fixture
def unit_model() -> MarketModel:
    return MarketModel(values=(1.0, -1.0), prior=(0.5, 0.5), horizon=1.0)


@pytest.fixture
def coarse_disc() -> Discretization:
    return Discretization(num_steps=8, num_paths=200, simplex_grid=21, seed=5)


def test_constant_price_zero_strategy_is_exact(unit_model, coarse_disc, oracle_constants):
    expected = oracle_constants["certificate"]["constant_price_zero_strategy"]["epsilon1"]
    certificate = certify(unit_model, 0.0, ConstantStrategy((0.0, 0.0)), coarse_disc)
    assert certificate.epsilon1 == pytest.approx(expected, abs=1e-10)
    assert certificate.epsilon1_abs == pytest.approx(expected, abs=1e-10)
    assert certificate.per_type_gaps == pytest.approx([math.sqrt(2.0) - 1.0] * 2, abs=1e-10)
    assert certificate.epsilon2 == pytest.approx(0.0, abs=1e-14)
    assert certificate.epsilon == pytest.approx(expected, abs=1e-10)
    assert certificate.value_solver == "grid"
    assert certificate.verdicts == {"epsilon1_within_noise": True, "epsilon2_nonnegative": True}


def test_price_mismatch_of_wrong_constant_price(unit_model, coarse_disc):
    certificate = certify(unit_model, ConstantPrice(0.5), ConstantStrategy((0.0, 0.0)), coarse_disc)
    assert certificate.epsilon2 == pytest.approx(0.5, abs=1e-12)


def test_path_price_uses_regression_values(unit_model, coarse_disc):
    bundle = gen_paths(coarse_disc, unit_model.horizon)
    price = PathPrice(np.zeros((bundle.num_paths, bundle.num_steps + 1)))
    certificate = certify(unit_model, price, ConstantStrategy((0.0, 0.0)), coarse_disc, bundle=bundle)
    assert certificate.value_solver == "regress"
    assert certificate.epsilon1 == pytest.approx(math.sqrt(2.0) - 1.0, abs=1e-8)


def test_path_price_shape_is_checked(unit_model, coarse_disc):
    bundle = gen_paths(coarse_disc, unit_model.horizon)
    with pytest.raises(ValueError):
        certify(unit_model, PathPrice(np.zeros((3, 3))), ConstantStrategy((0.0, 0.0)), coarse_disc, bundle=bundle)


def test_certificate_json_matches_schema(unit_model, coarse_disc, tmp_path):
    certificate = certify(unit_model, 0.0, ConstantStrategy((0.0, 0.0)), coarse_disc)
    dest = certificate.to_json(tmp_path / "certificate.json")
    payload = json.loads(dest.read_text(encoding="utf-8"))
    assert payload["num_paths"] == 200
    assert payload["seed"] == 5
    assert payload["dt"] == pytest.approx(0.125)
    assert "eps1=" in certificate.summary_line()


def test_certificate_schema_rejects_negative_epsilon2(unit_model, coarse_disc, tmp_path):
    certificate = certify(unit_model, 0.0, ConstantStrategy((0.0, 0.0)), coarse_disc)
    certificate.epsilon2 = -1.0
    with pytest.raises(jsonschema.ValidationError):
        certificate.to_json(tmp_path / "certificate.json")


def test_equilibrium_certificate(canonical_model, small_disc):
    solution = solve_fbsde(canonical_model, small_disc, "grid")
    certificate = certify_solution(solution)
    assert certificate.value_solver == "grid"
    assert certificate.sup_values == pytest.approx(solution.y0.tolist(), abs=1e-5)
    assert np.isfinite(certificate.epsilon1)
    assert certificate.verdicts["epsilon2_nonnegative"]


def test_filter_price_with_separate_market_strategy(unit_model, coarse_disc):
    certificate = certify(
        unit_model, FilterPrice(ConstantStrategy((0.0, 0.0))), ConstantStrategy((0.5, -0.5)), coarse_disc
    )
    assert certificate.epsilon2 > 0.0
    assert len(certificate.per_type_gaps) == 2


def test_setvalue_membership(unit_model, coarse_disc):
    certificate = certify(unit_model, 0.0, ConstantStrategy((0.0, 0.0)), coarse_disc)
    samples = setvalue_probe(unit_model, [(1.0, 1.0), (2.0, 2.0)], [certificate], [0.1, 0.5])
    verdicts = {(sample.candidate, sample.level): sample.member for sample in samples}
    assert verdicts[((1.0, 1.0), 0.5)] is True
    assert verdicts[((1.0, 1.0), 0.1)] is False
    assert verdicts[((2.0, 2.0), 0.5)] is False
    assert samples[0].gap == pytest.approx(0.0, abs=1e-12)


def test_setvalue_probe_argument_errors(unit_model, coarse_disc):
    certificate = certify(unit_model, 0.0, ConstantStrategy((0.0, 0.0)), coarse_disc)
    with pytest.raises(ValueError):
        setvalue_probe(unit_model, [(1.0,)], [certificate], [0.5])
    with pytest.raises(ValueError):
        setvalue_probe(unit_model, [(1.0, 1.0)], [(ConstantPrice(0.0), ConstantStrategy((0.0, 0.0)))], [0.5])
