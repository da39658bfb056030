"""Simulation and verification tools for 2x2 MIMO X networks."""

__version__ = "0.1.0"
