"""Toppling moves and controlled diffusion of unit mass on infinite graphs."""

__version__ = "0.1.0"
