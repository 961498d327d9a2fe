"""Stirling-cycle thermal machines on the strained Lieb-kagome lattice."""

__version__ = "0.1.0"
