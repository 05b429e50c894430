"""Bartle behavior profiling of MMO session-snapshot logs."""

__version__ = "0.1.0"
