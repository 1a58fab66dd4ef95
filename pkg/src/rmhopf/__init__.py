"""Near-Hopf stochastic diagnostics for the Rosenzweig-MacArthur model."""

__version__ = "0.1.0"
