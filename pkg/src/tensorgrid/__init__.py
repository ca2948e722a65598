"""Rank-structured tensor numerics for grid-based electronic structure."""

__version__ = "0.1.0"
