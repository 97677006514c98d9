"""Pareto front reconstruction for cardinality-constrained portfolio problems."""

__version__ = "1.0.0"
