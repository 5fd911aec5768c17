"""Simulation tools for fault-tolerant quantum memories and their simulators."""

__version__ = "0.1.0"
