"""Optimal local steering of uniform matrix-product-state trajectories."""

__version__ = "0.1.0"
