"""Aerial-supported multi-agent grid navigation with budgeted map sharing."""

__version__ = "0.1.0"
