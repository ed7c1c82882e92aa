"""Bayesian active learning engine with a desk-scale sim-to-real loop."""

__version__ = "0.1.0"
