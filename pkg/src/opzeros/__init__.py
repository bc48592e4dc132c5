"""Zeros of orthogonal polynomials: spacing bounds, clock behavior, POPUC."""

__version__ = "0.1.0"
