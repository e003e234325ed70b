"""Numerical Chern-connection geometry of chart-defined Hermitian metrics."""

__version__ = "0.1.0"
