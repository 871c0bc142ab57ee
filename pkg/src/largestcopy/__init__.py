"""Largest similar copy of a convex polygon inside a polygonal domain."""

__version__ = "0.1.0"
