"""Market model, cost and Hamiltonian, and config ingestion."""

from .config import ConfigError, LoadedConfig, dump_model, load_model, load_model_file
from .hamiltonian import Hamiltonian, cost_eval, ham_eval, hamiltonian_for
from .model import CostSpec, Discretization, MarketModel, SolverSettings, normalize_prior

__all__ = [
    "ConfigError",
    "CostSpec",
    "Discretization",
    "Hamiltonian",
    "LoadedConfig",
    "MarketModel",
    "SolverSettings",
    "cost_eval",
    "dump_model",
    "ham_eval",
    "hamiltonian_for",
    "load_model",
    "load_model_file",
    "normalize_prior",
]
