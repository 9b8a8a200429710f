"""Multilinear forms over exact and floating fields: congruence, symmetric equivalence and direct sums."""

__version__ = "0.1.0"
