"""Reference values computed independently of the solvers."""

from .reference import (
    FixedPointOracleError,
    OracleResult,
    oracle_bridge_moments,
    oracle_hamiltonian,
    oracle_onestep_equilibrium,
)

__all__ = [
    "FixedPointOracleError",
    "OracleResult",
    "oracle_bridge_moments",
    "oracle_hamiltonian",
    "oracle_onestep_equilibrium",
]
