"""Gaussian-prior bridge equilibrium and its truncation study."""

from .gaussian import (
    BridgeInstance,
    bridge_certificate,
    bridge_values,
    gaussian_fixed_point_check,
    simulate_bridge,
    truncation_rate,
)

__all__ = [
    "BridgeInstance",
    "bridge_certificate",
    "bridge_values",
    "gaussian_fixed_point_check",
    "simulate_bridge",
    "truncation_rate",
]
