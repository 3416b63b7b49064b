"""Pseudo-spectral laboratory for the dispersion-generalized Benjamin-Ono equation."""

__version__ = "0.1.0"
