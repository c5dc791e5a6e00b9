"""Reconstruction and analysis of solar auction outcomes from public registers."""

__version__ = "0.1.0"
