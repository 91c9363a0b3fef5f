"""Numerical laboratory for sharp L^p inequalities and their stability."""

__version__ = "0.1.0"
