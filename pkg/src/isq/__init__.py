"""Indivisible stochastic processes and their unitary correspondence."""

__version__ = "0.1.0"
