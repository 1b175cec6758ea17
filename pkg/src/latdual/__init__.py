"""Lattice workbench for free-field one-particle spaces and duality checks."""

__version__ = "0.1.0"
