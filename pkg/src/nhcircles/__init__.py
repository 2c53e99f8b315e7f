"""Invariant attractive and repulsive circles of the dissipative spin-orbit map."""

__version__ = "0.1.0"
