"""Kyle-Back insider-trading equilibrium laboratory.

Solves the equilibrium FBSDE for a discretely distributed asset value, certifies
ε-equilibria, reproduces the Gaussian bridge example and probes the level-set
characterization of the game's set value.
"""

from __future__ import annotations

__version__ = "0.1.0"

__all__ = ["__version__"]
