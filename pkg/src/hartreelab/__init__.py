"""Hartree dynamics and localized virial diagnostics on periodic grids."""
__version__ = "0.1.0"
