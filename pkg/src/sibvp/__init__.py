"""Straight-inverse (SI) solver for stiff two-point boundary value problems."""

__version__ = "0.1.0"
