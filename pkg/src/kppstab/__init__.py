"""Numerical laboratory for the pointwise stability of the critical Fisher-KPP front."""

__version__ = "0.1.0"
