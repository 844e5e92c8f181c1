"""Handoff and coverage analysis for two-tier RF/THz cellular networks."""

__version__ = "0.1.0"
