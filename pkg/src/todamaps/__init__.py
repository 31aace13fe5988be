"""Lie-algebraic machinery, Lax connections and exact solutions for Toda-type
systems and harmonic maps into SU(2) / SU(1,1)."""

__version__ = "0.1.0"
