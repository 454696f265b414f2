"""Quantum projective space toolkit: coordinate algebras, K-theory and
K-homology generators, index pairings, and Dirac-type spectral data."""

__version__ = "0.1.0"
