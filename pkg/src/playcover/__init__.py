"""Curiosity-driven playtest coverage on a small 3D sandbox."""

__version__ = "0.1.0"
