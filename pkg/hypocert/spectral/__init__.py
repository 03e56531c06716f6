"""Spectral verification on periodic grids."""
