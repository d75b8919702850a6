"""Numerical laboratory for dual centroid and intersection star bodies."""
__version__ = "0.1.0"
