"""Deterministic simulator for a tile-based distributed wireless facility."""

__version__ = "0.1.0"
