"""Genetic and photosynthetic optimisation engines with reproducible benchmark runs."""

__version__ = "0.1.0"
