"""dopasym: discrete orthogonal polynomials, constrained equilibrium measures,
asymptotic formulas and the determinantal ensembles built from them."""

__version__ = "0.1.0"
