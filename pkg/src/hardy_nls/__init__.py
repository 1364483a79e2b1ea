"""Ground states and dynamics of the focusing NLS with an inverse-square
potential on the half-line."""

from hardy_nls.grid import Field, Grid, GridKind, make_grid
from hardy_nls.functionals import Params, Regime

__all__ = ["Field", "Grid", "GridKind", "Params", "Regime", "make_grid"]
__version__ = "0.1.0"
