"""Quantum steering ellipsoids of two-qubit states."""

__version__ = "0.1.0"
