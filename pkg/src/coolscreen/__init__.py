"""Desk-scale molecular screening engine."""

__version__ = "0.1.0"
