"""Cyclical quantum memory simulator."""

__version__ = "0.1.0"
