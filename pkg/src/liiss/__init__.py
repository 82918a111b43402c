"""Numerical laboratory for local integral input-to-state stability (LiISS)."""

__version__ = "0.1.0"
