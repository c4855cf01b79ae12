"""Numerical laboratory for 2D Boussinesq perturbations of Couette flow."""

__version__ = "0.1.0"
