"""Finite-dimensional distributions of CTRW scaling limits and their overshooting variants."""

__version__ = "0.1.0"
