"""Convex-constrained Gaussian sequence model: geometry, rates and minimax procedures."""
