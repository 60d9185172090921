import math
from pathlib import Path

import pytest

from src.market.config import ConfigError, dump_model, load_model, load_model_file, load_runtime_settings
from src.market.model import CostSpec, Discretization, MarketModel, SolverSettings, normalize_prior

CANONICAL = """
N: 2
v: [1.0, -1.0]
p: [0.5, 0.5]
T: 0.25
"""


def test_canonical_document_defaults():
    model, disc, solver = load_model(CANONICAL)
    assert model.values == (1.0, -1.0)
    assert model.prior == (0.5, 0.5)
    assert model.horizon == 0.25
    assert model.cost.variant == "sqrt_closed_form"
    assert disc == Discretization()
    assert solver == SolverSettings()


def test_shipped_configs_load(config_dir: Path):
    for name in ("canonical_n2.yaml", "n1.yaml", "n3_uniform.yaml", "t8_diverge.yaml", "quadratic_n2.yaml"):
        loaded = load_model_file(config_dir / name)
        assert math.fsum(loaded.model.prior) == 1.0


def test_prior_is_renormalized():
    loaded = load_model("N: 3\nv: [0, 1, 2]\np: [1, 1, 1]\nT: 1.0\n")
    assert math.fsum(loaded.model.prior) == 1.0
    assert loaded.model.prior[0] == pytest.approx(1.0 / 3.0)


@pytest.mark.parametrize(
    "document, fragment",
    [
        ("N: 2\nv: [1.0, 1.0]\np: [0.5, 0.5]\nT: 1.0\n", "v"),
        ("N: 3\nv: [1.0, -1.0]\np: [0.5, 0.5]\nT: 1.0\n", "N=3"),
        ("N: 2\nv: [1.0, -1.0]\np: [0.5, 0.5]\nT: 0.0\n", "T"),
        ("N: 2\nv: [1.0, -1.0]\np: [1.0, 0.0]\nT: 1.0\n", "p"),
        ("N: 2\nv: [1.0, -1.0]\np: [0.5, 0.5]\nT: 1.0\nextra: 1\n", "extra"),
        ("N: 2\nv: [1.0, -1.0]\np: [0.5, 0.5]\nT: 1.0\ncost: {variant: quadratic}\n", "lam"),
        ("N: 2\nv: [1.0, -1.0]\np: [0.5, 0.5]\nT: 1.0\naction_bound: 2.0\n", "action_bound"),
        ("N: 2\nv: [1.0, -1.0]\np: [0.5, 0.5]\nT: 1.0\ndiscretization: {num_steps: 0}\n", "num_steps"),
    ],
)
def test_invalid_documents_name_the_offending_key(document, fragment):
    with pytest.raises(ConfigError) as excinfo:
        load_model(document)
    assert fragment in str(excinfo.value)


def test_parse_failure_and_non_mapping():
    with pytest.raises(ConfigError):
        load_model("N: [1, 2")
    with pytest.raises(ConfigError):
        load_model("- 1\n- 2\n")


def test_missing_file_raises(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_model_file(tmp_path / "absent.yaml")


def test_dump_reloads_identically():
    model = MarketModel(
        values=(0.1, 0.7, -2.3),
        prior=normalize_prior([0.2, 0.3, 0.5]),
        horizon=0.3,
        cost=CostSpec(variant="quadratic", action_bound=1.5, lam=0.7),
    )
    disc = Discretization(num_steps=8, num_paths=100, simplex_grid=11, seed=3)
    solver = SolverSettings(picard_tol=1e-6, damping=0.25)
    reloaded = load_model(dump_model(model, disc, solver))
    assert reloaded.model == model
    assert reloaded.discretization == disc
    assert reloaded.solver == solver


def test_tabulated_cost_bound_defaults_to_table_edge():
    document = CANONICAL + "cost: {variant: tabulated, theta: [-2, 0, 2], f: [1, 0, 1]}\n"
    model = load_model(document).model
    assert model.action_bound == 2.0
    assert model.cost.table_theta == (-2.0, 0.0, 2.0)


def test_model_rejects_unnormalized_prior():
    with pytest.raises(ValueError):
        MarketModel(values=(1.0, -1.0), prior=(0.5, 0.6), horizon=1.0)


def test_runtime_settings_from_environment(monkeypatch, tmp_path):
    monkeypatch.setenv("KYLEBACK_OUTPUT_ROOT", str(tmp_path))
    monkeypatch.setenv("KYLEBACK_THREADS", "3")
    settings = load_runtime_settings()
    assert settings.output_root == tmp_path
    assert settings.threads == 3

    monkeypatch.setenv("KYLEBACK_THREADS", "many")
    with pytest.raises(ValueError):
        load_runtime_settings()


def test_runtime_settings_defaults(monkeypatch):
    monkeypatch.delenv("KYLEBACK_OUTPUT_ROOT", raising=False)
    monkeypatch.delenv("KYLEBACK_THREADS", raising=False)
    settings = load_runtime_settings()
    assert settings.output_root == Path("artifacts")
    assert settings.threads == 0
