"""Axially symmetric constant Q-curvature equation on S^n: spectral solver, continuation and identity checks."""

__version__ = "0.1.0"
