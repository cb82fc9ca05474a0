"""Simulation lab for extrapolated dihedral coset states: a quantum public-key
scheme, search reductions, attacks and information bounds."""

__version__ = "0.1.0"
