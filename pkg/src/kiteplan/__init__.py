"""Kinodynamic multi-robot motion planning with translation-invariant edge bundles."""

__version__ = "0.1.0"
