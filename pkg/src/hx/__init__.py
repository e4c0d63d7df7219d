"""Numerical laboratory for fractional operators, half-space extensions and
commutator estimates on periodic grids."""

__version__ = "0.1.0"
