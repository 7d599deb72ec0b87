"""Asymmetric pairwise affinity loss laboratory."""

__version__ = "0.1.0"
