"""Acceptance-level checks on the symmetric two-type instance at full resolution."""

import numpy as np
import pytest

from src.levelset.duality import duality_probe, equilibrium_controls, eval_cost
from src.market.model import Discretization, MarketModel
from src.sim.paths import gen_paths
from src.sim.strategies import ShiftedStrategy
from src.solvers.fbsde import default_initializations, solve_fbsde, uniqueness_probe
from src.verify.certificate import FilterPrice, certify, certify_solution, setvalue_probe

NODES = 201
STEPS = 64
PATHS = 10_000


@pytest.fixture(scope="module")
def model() -> MarketModel:
    return MarketModel(values=(1.0, -1.0), prior=(0.5, 0.5), horizon=0.25)


@pytest.fixture(scope="module")
def disc() -> Discretization:
    return Discretization(num_steps=STEPS, num_paths=PATHS, simplex_grid=NODES, seed=42)


@pytest.fixture(scope="module")
def solution(model, disc):
    return solve_fbsde(model, disc, "grid")


@pytest.fixture(scope="module")
def certificate(solution):
    return certify_solution(solution)


@pytest.mark.slow
def test_forward_pass_stays_inside_the_simplex(solution):
    assert solution.converged
    assert solution.clip_events == 0
    assert solution.max_sum_defect <= 1e-10
    assert not solution.truncation_active


@pytest.mark.slow
def test_distinct_picard_starts_reach_one_surface(model):
    disc = Discretization(num_steps=16, num_paths=2000, simplex_grid=41, seed=42)
    starts = default_initializations(model, disc)
    assert len(starts) == 5
    report = uniqueness_probe(model, disc, starts)
    assert report.spread < 1e-6
    assert np.ptp(report.y0, axis=0) == pytest.approx([0.0, 0.0], abs=1e-6)


@pytest.mark.slow
def test_epsilon_shrinks_under_time_refinement(model):
    epsilons = []
    for steps in (16, 32, 64):
        disc = Discretization(num_steps=steps, num_paths=PATHS, simplex_grid=NODES, seed=42)
        epsilons.append(certify_solution(solve_fbsde(model, disc, "grid")).epsilon)
    assert epsilons[0] > epsilons[1] > epsilons[2]


@pytest.mark.slow
def test_equilibrium_gaps_vanish(certificate):
    assert certificate.per_type_gaps == pytest.approx([0.0, 0.0], abs=5e-3)
    assert certificate.epsilon < 5e-3
    assert certificate.verdicts["epsilon1_within_noise"]


@pytest.mark.slow
def test_shifted_strategy_raises_epsilon1(model, disc, solution, certificate):
    shifted = ShiftedStrategy(base=solution.strategy, shift=0.2, bound=model.action_bound)
    bundle = gen_paths(disc, model.horizon)
    degraded = certify(model, FilterPrice(solution.strategy), shifted, disc, bundle=bundle)
    assert degraded.epsilon1 > certificate.epsilon1 + 3.0 * degraded.epsilon1_se


@pytest.mark.slow
def test_levelset_costs_at_equilibrium(model, solution):
    bundle = gen_paths(solution.disc, model.horizon)
    report = eval_cost(model, solution.y0, equilibrium_controls(solution), bundle)
    assert float(report.running.sum()) < 1e-4

    membership = duality_probe(model, solution, [solution.y0.tolist(), (solution.y0 + 0.5).tolist()], bundle=bundle)
    assert [row.verdict for row in membership.rows] == ["in", "out"]


@pytest.mark.slow
def test_levelset_cost_shrinks_under_time_refinement(model):
    totals = []
    for steps in (16, 32, 64):
        disc = Discretization(num_steps=steps, num_paths=PATHS, simplex_grid=NODES, seed=42)
        refined = solve_fbsde(model, disc, "grid")
        bundle = gen_paths(disc, model.horizon)
        totals.append(eval_cost(model, refined.y0, equilibrium_controls(refined), bundle).total)
    assert totals[0] > totals[1] > totals[2]


@pytest.mark.slow
def test_set_value_accepts_equilibrium_values(model, solution, certificate):
    accepted = setvalue_probe(model, [solution.y0.tolist()], [certificate], [certificate.epsilon])
    assert accepted[0].member

    rerun = solve_fbsde(model, solution.disc.replace(seed=43), "grid")
    again = setvalue_probe(model, [rerun.y0.tolist()], [certificate], [2.0 * certificate.epsilon])
    assert again[0].member
