"""Evolutionary dynamics of the N-player trust game with punishing investors."""

__version__ = "0.1.0"
