"""Desk-scale workbench for effective randomness, K-triviality and stage constructions."""

__version__ = "0.1.0"
