"""Synthesis and verification of three-party Bell inequalities with low detection-efficiency thresholds."""

__version__ = "0.1.0"
