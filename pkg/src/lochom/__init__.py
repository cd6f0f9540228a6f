"""Spectral asymptotics workbench for singularly perturbed fourth-order
eigenproblems with locally periodic coefficients."""

__version__ = "0.1.0"
