"""Numerical verification toolkit for the functional E_F(g) = int F(S) dv over Riemannian metrics."""

from .grid_chart import Boundary, ChartSpec
from .f_einstein import FScalarFunction

__version__ = "0.1.0"

__all__ = ["Boundary", "ChartSpec", "FScalarFunction", "__version__"]
