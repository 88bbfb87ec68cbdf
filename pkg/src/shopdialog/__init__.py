"""Recommendation dialog simulation and benchmark harness for store scenes."""

__version__ = "0.1.0"
