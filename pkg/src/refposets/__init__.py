"""Finite-scale tools for models of countable well-founded posets."""

__version__ = "0.1.0"
