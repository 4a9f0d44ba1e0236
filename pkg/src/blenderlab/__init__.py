"""Numerical construction and certification of robustly transitive symplectic
iterated-function systems with tangency-carrying blending regions."""

__version__ = "0.1.0"
