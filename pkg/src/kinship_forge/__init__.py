"""Deterministic kinship-reasoning puzzle benchmark generator with a symbolic oracle."""

__version__ = "0.1.0"
