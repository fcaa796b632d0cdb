"""Numerical laboratory for Orlicz-space analysis."""

__version__ = "0.1.0"
