"""Numerical checks of affine Sobolev inequalities, rearrangements and projection bodies."""

__version__ = "0.1.0"
