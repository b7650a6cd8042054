"""Linearly implicit multistep methods for stiff ODEs."""

__version__ = "0.1.0"
