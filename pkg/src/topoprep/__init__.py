"""Adiabatic preparation of topologically ordered states on small lattices."""

__version__ = "0.1.0"
