"""Spin-system thermodynamics and renormalized market temperatures."""

__version__ = "0.1.0"
