"""Quasi-steady-state power flow accelerated by clustered linear-regression
surrogates with solver/model switching heuristics."""

__version__ = "0.1.0"
