"""Cyclic-proof safety verification for linear transition systems."""

__version__ = "0.1.0"
