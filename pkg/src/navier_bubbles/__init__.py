"""Navier-boundary bilaplacian bubbles: solvers, Green functions, energy expansion and flows."""

__version__ = "0.1.0"
