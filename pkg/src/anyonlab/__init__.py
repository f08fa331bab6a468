"""Simulation and verification laboratory for gauge-coupled Schrodinger
dynamics of two-dimensional smeared-flux gases: a pseudospectral solver
for the self-consistent Chern-Simons-Schrodinger flow, an exact few-body
propagator, and a numerical certification suite for the underlying kernel
formulas and operator inequalities."""

__version__ = "0.1.0"
