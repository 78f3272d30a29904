"""Closed Kac-Rice formulas for zero counts and nodal volumes of Gaussian fields."""

__version__ = "0.1.0"
