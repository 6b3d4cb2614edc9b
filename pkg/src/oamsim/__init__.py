"""Numerical toolkit for orbital-angular-momentum photon entanglement experiments."""

__version__ = "0.1.0"
