"""Scalar functionals: mass, Hardy form, energy, action, Nehari and virial
functionals, Pohozaev residuals, virial moments and the orbital distance.

Every integral is the grid quadrature ``h * sum``. The gradient seminorm
uses one-sided differences across all ``N`` cells so that
``grad_norm_sq(u) == <-Lap_h u, u>``; with that choice the discrete
functionals are exact potentials for the discrete operators used by the
solvers and the time stepper.
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, fields
from typing import NamedTuple, Optional

import numpy as np

from hardy_nls.grid import Field, Grid, GridKind, derivative, forward_differences


class Regime(str, enum.Enum):
    SUBCRITICAL = "Subcritical"
    CRITICAL = "Critical"
    SUPERCRITICAL = "Supercritical"


@dataclass(frozen=True)
class Params:
    p: float
    c: float
    omega: float = 1.0

    def __post_init__(self):
        if not self.p > 1:
            raise ValueError(f"need p > 1, got {self.p}")
        if not self.omega > 0:
            raise ValueError(f"need omega > 0, got {self.omega}")
        if not 0 <= self.c < 0.25:
            raise ValueError(f"need 0 <= c < 1/4, got {self.c}")

    @property
    def regime(self) -> Regime:
        if self.p < 5:
            return Regime.SUBCRITICAL
        if self.p == 5:
            return Regime.CRITICAL
        return Regime.SUPERCRITICAL

    @property
    def pohozaev_coef(self) -> float:
        """(p-1) / (2(p+1)), the weight of the L^{p+1} term in Q."""
        return (self.p - 1) / (2 * (self.p + 1))

    def with_(self, **kw) -> "Params":
        return Params(**{**asdict(self), **kw})

    def to_dict(self) -> dict:
        return {"p": self.p, "c": self.c, "omega": self.omega}


class Parts(NamedTuple):
    """The four integrals every functional is built from."""

    mass: float
    grad_sq: float
    hardy_term: float
    lp1: float

    def hardy(self, c: float) -> float:
        return self.grad_sq - c * self.hardy_term


def _check_potential(grid: Grid, c: float) -> None:
    if c > 0 and grid.kind is not GridKind.HALF_LINE:
        raise ValueError("c > 0 requires a half-line grid")


def parts(u: Field, params: Params) -> Parts:
    grid = u.grid
    _check_potential(grid, params.c)
    h = grid.h
    dens = np.abs(u.values) ** 2
    du = forward_differences(u.values, h)
    if grid.kind is GridKind.HALF_LINE:
        hardy_term = h * float(np.sum(dens / grid.nodes**2))
    else:
        hardy_term = 0.0
    return Parts(
        mass=h * float(np.sum(dens)),
        grad_sq=h * float(np.sum(np.abs(du) ** 2)),
        hardy_term=hardy_term,
        lp1=h * float(np.sum(dens ** ((params.p + 1) / 2))),
    )


def mass(u: Field) -> float:
    return u.grid.h * float(np.sum(np.abs(u.values) ** 2))


def grad_norm_sq(u: Field) -> float:
    return u.grid.h * float(np.sum(np.abs(forward_differences(u.values, u.grid.h)) ** 2))


def hardy_term(u: Field) -> float:
    """Integral of |u|^2 / x^2 on a half-line grid."""
    if u.grid.kind is not GridKind.HALF_LINE:
        raise ValueError("1/x^2 is only defined on half-line grids")
    return u.grid.h * float(np.sum(np.abs(u.values) ** 2 / u.grid.nodes**2))


def lp1(u: Field, p: float) -> float:
    return u.grid.h * float(np.sum(np.abs(u.values) ** (p + 1)))


def hardy(u: Field, params: Params) -> float:
    return parts(u, params).hardy(params.c)


def energy(u: Field, params: Params) -> float:
    P = parts(u, params)
    return 0.5 * P.hardy(params.c) - P.lp1 / (params.p + 1)


def action(u: Field, params: Params) -> float:
    P = parts(u, params)
    return 0.5 * P.hardy(params.c) + 0.5 * params.omega * P.mass - P.lp1 / (params.p + 1)


def nehari_value(u: Field, params: Params) -> float:
    """J(u) = H(u) + omega*mass(u) - ||u||_{p+1}^{p+1}."""
    P = parts(u, params)
    return P.hardy(params.c) + params.omega * P.mass - P.lp1


def q_value(u: Field, params: Params) -> float:
    """Q(u) = H(u) - (p-1)/(2(p+1)) ||u||_{p+1}^{p+1}."""
    P = parts(u, params)
    return P.hardy(params.c) - params.pohozaev_coef * P.lp1


def pohozaev_residuals(u: Field, params: Params) -> tuple[float, float]:
    P = parts(u, params)
    H = P.hardy(params.c)
    return H + params.omega * P.mass - P.lp1, H - params.pohozaev_coef * P.lp1


def virial_moment(u: Field) -> float:
    if u.grid.kind is not GridKind.HALF_LINE:
        raise ValueError("virial moment is defined on half-line grids")
    return u.grid.h * float(np.sum(u.grid.nodes**2 * np.abs(u.values) ** 2))


def virial_flux(u: Field) -> float:
    """4 Im int conj(u) x u' dx with the centered derivative.

    On this grid the value coincides with the time derivative of
    ``virial_moment`` under the semi-discrete flow.
    """
    if u.grid.kind is not GridKind.HALF_LINE:
        raise ValueError("virial flux is defined on half-line grids")
    du = derivative(u).values
    return 4.0 * u.grid.h * float(np.sum(np.imag(np.conj(u.values) * u.grid.nodes * du)))


def h1_inner(a: Field, b: Field) -> complex:
    """<a, b>_{H^1} = int a' conj(b') + a conj(b)."""
    h = a.grid.h
    da = forward_differences(a.values, h)
    db = forward_differences(b.values, h)
    return h * complex(np.sum(da * np.conj(db)) + np.sum(a.values * np.conj(b.values)))


def h1_norm(u: Field) -> float:
    return math.sqrt(max(h1_inner(u, u).real, 0.0))


class OrbitalDistance(NamedTuple):
    theta: float
    dist: float
    degenerate: bool


def orbital_distance(u: Field, phi: Field) -> OrbitalDistance:
    """min over theta of ||u - e^{i theta} phi||_{H^1}, with its minimizer.

    The squared distance is ``|u|^2 + |phi|^2 - 2 Re(e^{-i theta} <u,phi>)``,
    so the optimal phase is ``arg <u, phi>``. A zero inner product makes
    every phase optimal; theta = 0 is returned and flagged.
    """
    if u.grid != phi.grid:
        raise ValueError("fields live on different grids")
    ip = h1_inner(u, phi)
    scale = h1_norm(u) * h1_norm(phi)
    degenerate = abs(ip) <= 1e-14 * scale or scale == 0.0
    theta = 0.0 if degenerate else math.atan2(ip.imag, ip.real)
    dist = h1_norm(u - phi * np.exp(1j * theta))
    return OrbitalDistance(theta, dist, degenerate)


CSV_COLUMNS = (
    "t",
    "mass",
    "energy",
    "action",
    "J",
    "Q",
    "grad_norm_sq",
    "hardy_term",
    "lp1",
    "virial_moment",
    "virial_flux",
    "orbital_dist",
    "theta_star",
)


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    mass: float
    energy: float
    action: float
    J: float
    Q: float
    grad_norm_sq: float
    hardy_term: float
    lp1: float
    virial_moment: float
    virial_flux: float
    orbital_dist: Optional[float] = None
    theta_star: Optional[float] = None

    def to_row(self) -> list[str]:
        return ["" if v is None else repr(float(v)) for v in (getattr(self, k) for k in CSV_COLUMNS)]

    @classmethod
    def from_row(cls, row) -> "DiagnosticsRecord":
        vals = [None if s == "" else float(s) for s in row]
        return cls(*vals)


assert tuple(f.name for f in fields(DiagnosticsRecord)) == CSV_COLUMNS


def diagnostics(u: Field, params: Params, t: float = 0.0, reference: Field | None = None) -> DiagnosticsRecord:
    P = parts(u, params)
    H = P.hardy(params.c)
    half = u.grid.kind is GridKind.HALF_LINE
    od = orbital_distance(u, reference) if reference is not None else None
    return DiagnosticsRecord(
        t=t,
        mass=P.mass,
        energy=0.5 * H - P.lp1 / (params.p + 1),
        action=0.5 * H + 0.5 * params.omega * P.mass - P.lp1 / (params.p + 1),
        J=H + params.omega * P.mass - P.lp1,
        Q=H - params.pohozaev_coef * P.lp1,
        grad_norm_sq=P.grad_sq,
        hardy_term=P.hardy_term,
        lp1=P.lp1,
        virial_moment=virial_moment(u) if half else 0.0,
        virial_flux=virial_flux(u) if half else 0.0,
        orbital_dist=None if od is None else od.dist,
        theta_star=None if od is None else od.theta,
    )
