"""Numerical laboratory for diffusive-dispersive regularizations of scalar
conservation laws: spectral solvers, a priori estimate verification,
entropy-solution references, and singular-limit sweeps."""

__version__ = "0.1.0"
