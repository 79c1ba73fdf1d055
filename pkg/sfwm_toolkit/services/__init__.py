"""Numerical services: dispersion, spectra, counts, fitting and purity."""
