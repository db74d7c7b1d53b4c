"""Numerical lab for constant spacetime mean curvature surfaces on spherically symmetric null cones."""

__version__ = "0.1.0"
