"""Generalized Ricci flow laboratory on reduced model geometries."""

__version__ = "0.1.0"
