"""Exact SOS certification toolkit for Gaussian product moment inequalities."""

__version__ = "0.1.0"
