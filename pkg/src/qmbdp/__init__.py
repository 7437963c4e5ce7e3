"""Projective-detection dynamics of an interacting fermion chain."""

__version__ = "0.1.0"
