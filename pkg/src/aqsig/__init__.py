"""Arbitrated quantum signature protocol simulator."""

__version__ = "0.1.0"
