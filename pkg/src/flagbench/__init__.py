"""Desk-scale benchmarking of flag-based syndrome extraction on the [[5,1,3]] code."""

__version__ = "0.1.0"
