"""Exact computer algebra for Drinfeld-Sokolov hierarchies of type D4, B3 and G2."""

__version__ = "0.1.0"
