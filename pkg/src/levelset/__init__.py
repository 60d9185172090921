from .duality import (
    ControlPair,
    SearchSpec,
    duality_probe,
    equilibrium_controls,
    eval_cost,
    search_W,
    write_membership_csv,
    zero_controls,
)

__all__ = [
    "ControlPair",
    "SearchSpec",
    "duality_probe",
    "equilibrium_controls",
    "eval_cost",
    "search_W",
    "write_membership_csv",
    "zero_controls",
]
