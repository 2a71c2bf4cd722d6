"""Pulse-level parallelization of commuting two-qubit gates."""

__version__ = "0.1.0"
