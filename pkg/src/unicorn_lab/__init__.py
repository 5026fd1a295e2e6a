"""Numerical verification toolkit for Finsleroid-Finsler geometry."""
__version__ = "0.1.0"
