"""Collocation-based robust variational PINNs on the unit square."""

__version__ = "0.1.0"
