"""Completeness and curvature of conformal metrics on the plane."""

__version__ = "0.1.0"
