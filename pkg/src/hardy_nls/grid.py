"""Uniform interior-node grids with Dirichlet ends.

Only interior nodes are stored. On the half-line the origin is never a node,
so ``1/x**2`` is always finite; the homogeneous boundary values at both ends
enter every stencil as ghost zeros.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.interpolate import CubicSpline

MIN_NODES = 16


class GridKind(str, enum.Enum):
    HALF_LINE = "HalfLine"
    FULL_LINE = "FullLine"


@dataclass(frozen=True)
class Grid:
    """Uniform grid on ``(0, L)`` (half-line) or ``(-L, L)`` (full line).

    ``N`` is the number of cells, so there are ``N - 1`` interior nodes.
    """

    kind: GridKind
    L: float
    N: int

    @cached_property
    def h(self) -> float:
        width = self.L if self.kind is GridKind.HALF_LINE else 2.0 * self.L
        return width / self.N

    @cached_property
    def left(self) -> float:
        return 0.0 if self.kind is GridKind.HALF_LINE else -self.L

    @cached_property
    def nodes(self) -> np.ndarray:
        x = self.left + self.h * np.arange(1, self.N)
        x.setflags(write=False)
        return x

    @property
    def size(self) -> int:
        return self.N - 1

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "L": self.L, "N": self.N}

    @classmethod
    def from_dict(cls, d: dict) -> "Grid":
        return make_grid(d["kind"], d["L"], d["N"])


def make_grid(kind: GridKind | str, L: float, N: int) -> Grid:
    kind = GridKind(kind)
    if not L > 0:
        raise ValueError(f"domain length must be positive, got L={L}")
    if int(N) != N or N < MIN_NODES:
        raise ValueError(f"need an integer N >= {MIN_NODES}, got N={N}")
    return Grid(kind, float(L), int(N))


@dataclass(frozen=True)
class Field:
    """Complex samples on the interior nodes of a grid.

    ``blowup`` marks a snapshot taken after the state lost resolution; only
    such fields may carry non-finite entries.
    """

    grid: Grid
    values: np.ndarray = field(repr=False)
    blowup: bool = False

    def __post_init__(self):
        v = np.array(self.values, dtype=complex)
        if v.shape != (self.grid.size,):
            raise ValueError(
                f"field has {v.shape} samples, grid has {self.grid.size} interior nodes"
            )
        if not self.blowup and not np.all(np.isfinite(v)):
            raise ValueError("non-finite field values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def x(self) -> np.ndarray:
        return self.grid.nodes

    def with_values(self, values) -> "Field":
        return Field(self.grid, values)

    def __mul__(self, other) -> "Field":
        return Field(self.grid, self.values * other)

    __rmul__ = __mul__

    def __add__(self, other: "Field") -> "Field":
        _check_same_grid(self, other)
        return Field(self.grid, self.values + other.values)

    def __sub__(self, other: "Field") -> "Field":
        _check_same_grid(self, other)
        return Field(self.grid, self.values - other.values)

    def __neg__(self) -> "Field":
        return Field(self.grid, -self.values)

    def abs(self) -> "Field":
        return Field(self.grid, np.abs(self.values))


def _check_same_grid(a: Field, b: Field) -> None:
    if a.grid != b.grid:
        raise ValueError("fields live on different grids")


def from_function(grid: Grid, f) -> Field:
    """Sample ``f`` at the interior nodes."""
    return Field(grid, f(grid.nodes))


def quadrature(grid: Grid, g) -> float:
    """Trapezoid rule with zero boundary values, i.e. ``h * sum(g)``."""
    g = np.asarray(g)
    if g.shape != (grid.size,):
        raise ValueError(f"expected {grid.size} samples, got {g.shape}")
    return float(grid.h * np.sum(g))


def derivative(u: Field) -> Field:
    """Centered differences with ghost zeros at both ends."""
    padded = np.concatenate(([0.0], u.values, [0.0]))
    return Field(u.grid, (padded[2:] - padded[:-2]) / (2.0 * u.grid.h))


def forward_differences(values: np.ndarray, h: float) -> np.ndarray:
    """The ``N`` one-sided differences across every cell, ghost zeros included.

    ``h * sum(|D+ u|**2)`` equals ``<-Lap_h u, u>`` exactly, which is why the
    gradient seminorm is measured with these rather than centered differences.
    """
    padded = np.concatenate(([0.0], values, [0.0]))
    return np.diff(padded) / h


def laplacian(values: np.ndarray, h: float) -> np.ndarray:
    """Three-point Dirichlet Laplacian on interior samples."""
    padded = np.concatenate(([0.0], values, [0.0]))
    return (padded[2:] - 2.0 * padded[1:-1] + padded[:-2]) / h**2


def inverse_square_weights(grid: Grid) -> np.ndarray:
    if grid.kind is not GridKind.HALF_LINE:
        raise ValueError("1/x^2 is only defined on half-line grids")
    return 1.0 / grid.nodes**2


def rescale(u: Field, lam: float) -> Field:
    """Mass-preserving dilation ``v(x) = lam**0.5 * u(lam * x)``.

    ``u`` is extended by its boundary zeros and interpolated with a cubic
    spline; points mapped outside the domain get 0.
    """
    if not lam > 0:
        raise ValueError(f"scaling factor must be positive, got {lam}")
    grid = u.grid
    if lam == 1.0:
        return u
    right = grid.left + grid.N * grid.h
    xs = np.concatenate(([grid.left], grid.nodes, [right]))
    ys = np.concatenate(([0.0], u.values, [0.0]))
    spline = CubicSpline(xs, ys)
    target = lam * grid.nodes
    inside = (target > grid.left) & (target < right)
    out = np.zeros(grid.size, dtype=complex)
    out[inside] = spline(target[inside])
    return Field(grid, np.sqrt(lam) * out)
