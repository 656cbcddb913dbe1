"""Shallow augmented-coordinate networks for piecewise functions and elliptic interface problems."""

__version__ = "0.1.0"
