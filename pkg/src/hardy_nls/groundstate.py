"""Ground states by two independent routes.

``minimize_nehari`` minimizes the action on the Nehari manifold by
preconditioned gradient descent with Armijo backtracking and a radial
re-projection after every step. ``normalized_gradient_flow`` minimizes the
energy at fixed mass by a backward-Euler imaginary-time flow followed by
renormalization. Both work on real, non-negative profiles.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.linalg import lapack

from hardy_nls.functionals import Params, h1_norm, orbital_distance, parts
from hardy_nls.grid import Field, Grid, GridKind, forward_differences, laplacian, rescale
from hardy_nls.soliton import soliton_field

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
_ROUNDOFF = 1e-13


@dataclass(frozen=True)
class SolverOptions:
    max_iters: int = 20000
    step_size: float = 1.0
    tol_residual: float = 1e-8
    tol_identity: float = 1e-3
    backtrack: float = 0.5
    armijo: float = 1e-4

    def __post_init__(self):
        if not (self.max_iters > 0 and self.step_size > 0 and self.tol_residual > 0 and self.tol_identity > 0):
            raise ValueError("solver options must be positive")
        if not 0 < self.backtrack < 1:
            raise ValueError("backtracking factor must lie in (0, 1)")


@dataclass
class GroundStateResult:
    profile: Field
    params: Params
    level_m: float
    mu: float
    iterations: int
    residual: float
    converged: bool
    level_I: Optional[float] = None
    omega_out: Optional[float] = None
    identity_report: dict = field(default_factory=dict)
    method: str = "nehari"
    history: list = field(default_factory=list, repr=False)

    @property
    def grid(self) -> Grid:
        return self.profile.grid

    def to_json(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "method": self.method,
            "params": self.params.to_dict(),
            "grid": self.grid.to_dict(),
            "level_m": self.level_m,
            "level_I": self.level_I,
            "omega_out": self.omega_out,
            "mu": self.mu,
            "iterations": self.iterations,
            "residual": self.residual,
            "converged": self.converged,
            "identities": self.identity_report,
        }

    def save(self, path_json: Path | str, path_csv: Path | str | None = None) -> None:
        path_json = Path(path_json)
        path_json.write_text(json.dumps(self.to_json(), indent=2))
        if path_csv is None:
            path_csv = path_json.with_suffix(".csv")
        x = self.grid.nodes
        np.savetxt(
            path_csv,
            np.column_stack([x, self.profile.values.real]),
            delimiter=",",
            header=f"schema_version={SCHEMA_VERSION}\nx,value",
            comments="",
            fmt="%.17g",
        )

    @classmethod
    def load(cls, path_json: Path | str, path_csv: Path | str | None = None) -> "GroundStateResult":
        path_json = Path(path_json)
        doc = json.loads(path_json.read_text())
        if path_csv is None:
            path_csv = path_json.with_suffix(".csv")
        data = np.loadtxt(path_csv, delimiter=",", skiprows=2, ndmin=2)
        grid = Grid.from_dict(doc["grid"])
        return cls(
            profile=Field(grid, data[:, 1]),
            params=Params(**doc["params"]),
            level_m=doc["level_m"],
            mu=doc["mu"],
            iterations=doc["iterations"],
            residual=doc["residual"],
            converged=doc["converged"],
            level_I=doc["level_I"],
            omega_out=doc["omega_out"],
            identity_report=doc["identities"],
            method=doc["method"],
        )


# ---------------------------------------------------------------------------
# discrete operators


def _potential(grid: Grid, c: float) -> np.ndarray:
    if c == 0:
        return np.zeros(grid.size)
    if grid.kind is not GridKind.HALF_LINE:
        raise ValueError("c > 0 requires a half-line grid")
    return c / grid.nodes**2


def linear_operator_bands(grid: Grid, c: float) -> tuple[np.ndarray, np.ndarray]:
    """Diagonal and off-diagonal of ``A = -Lap_h - c/x^2``."""
    h2 = grid.h**2
    diag = 2.0 / h2 - _potential(grid, c)
    off = np.full(grid.size - 1, -1.0 / h2)
    return diag, off


class _SPDTridiag:
    """Cached LDL^T factorization of a real symmetric positive tridiagonal."""

    def __init__(self, diag, off):
        d, e, info = lapack.dpttrf(diag, off)
        if info != 0:
            raise np.linalg.LinAlgError(f"tridiagonal operator is not positive definite (info={info})")
        self._d, self._e = d, e

    def solve(self, rhs):
        x, info = lapack.dpttrs(self._d, self._e, rhs)
        if info != 0:
            raise np.linalg.LinAlgError(f"dpttrs failed (info={info})")
        return x


def _apply_A(u: np.ndarray, grid: Grid, V: np.ndarray) -> np.ndarray:
    return -laplacian(u, grid.h) - V * u


def _parts_real(u: np.ndarray, grid: Grid, V: np.ndarray, p: float) -> tuple[float, float, float]:
    """(H, mass, lp1) for a real profile; V = c/x^2."""
    h = grid.h
    du = forward_differences(u, h)
    dens = u * u
    H = h * (float(du @ du) - float(V @ dens))
    return H, h * float(np.sum(dens)), h * float(np.sum(np.abs(u) ** (p + 1)))


def action_gradient(u: Field, params: Params) -> Field:
    """S'(u) = -u'' - (c/x^2) u + omega u - |u|^{p-1} u on the grid.

    With the quadrature inner product this is the exact gradient of the
    discrete action.
    """
    grid = u.grid
    V = _potential(grid, params.c)
    v = u.values
    g = -laplacian(v, grid.h) - V * v + params.omega * v - np.abs(v) ** (params.p - 1) * v
    return Field(grid, g)


def energy_gradient(u: Field, params: Params) -> Field:
    return action_gradient(u, params) - u * params.omega


def _l2(v: np.ndarray, h: float) -> float:
    return math.sqrt(h * float(np.vdot(v, v).real))


# ---------------------------------------------------------------------------
# Nehari projection


def nehari_scale(u: Field, params: Params) -> float:
    """t(u) = ((H(u) + omega mass(u)) / ||u||_{p+1}^{p+1})^(1/(p-1))."""
    P = parts(u, params)
    if P.lp1 == 0.0:
        raise ValueError("cannot project the zero field onto the Nehari manifold")
    num = P.hardy(params.c) + params.omega * P.mass
    if not num > 0:
        raise ValueError("H(u) + omega*mass(u) is not positive; c or the grid is invalid")
    return (num / P.lp1) ** (1.0 / (params.p - 1))


def nehari_project(u: Field, params: Params) -> Field:
    return u * nehari_scale(u, params)


def _project_real(u: np.ndarray, grid: Grid, V: np.ndarray, params: Params):
    H, M, P = _parts_real(u, grid, V, params.p)
    if P == 0.0:
        raise FloatingPointError("iterate collapsed to zero")
    num = H + params.omega * M
    if not num > 0:
        raise FloatingPointError("H + omega*mass became non-positive")
    t = (num / P) ** (1.0 / (params.p - 1))
    # on the manifold S = (p-1)/(2(p+1)) (H + omega mass)
    S = params.pohozaev_coef * t * t * num
    return t * u, S


# ---------------------------------------------------------------------------
# solvers


def default_init(grid: Grid, params: Params) -> Field:
    """c = 0 soliton at x = L/3 on the half-line (centered on the full line),
    cut to vanish at the origin."""
    if grid.kind is GridKind.FULL_LINE:
        return soliton_field(grid, params.p, params.omega)
    return near_origin_init(grid, params, center=grid.L / 3)


def near_origin_init(grid: Grid, params: Params, center: float = 2.0) -> Field:
    """Soliton bump centered at ``center``, made to vanish at the origin."""
    x = grid.nodes
    q = soliton_field(grid, params.p, params.omega, shift=center).values.real
    return Field(grid, q * (1 - np.exp(-x)))


def _line_search(u, S, d, slope, grid, V, params, opts):
    """Armijo backtracking from ``opts.step_size``; if the first trial is
    accepted the step keeps doubling while the projected action decreases."""
    step = opts.step_size

    def trial_at(t):
        return _project_real(np.abs(u + t * d), grid, V, params)

    def ok(t, val):
        # slack absorbs round-off in S once the decrease is below ~1e-16 S
        return val <= S + opts.armijo * t * slope + _ROUNDOFF * abs(S)

    trial, S_trial = trial_at(step)
    if ok(step, S_trial):
        for _ in range(30):
            nxt, S_nxt = trial_at(2 * step)
            if not (S_nxt < S_trial and ok(2 * step, S_nxt)):
                break
            step, trial, S_trial = 2 * step, nxt, S_nxt
        return step, trial, S_trial
    while step > 1e-14:
        step *= opts.backtrack
        trial, S_trial = trial_at(step)
        if ok(step, S_trial):
            break
    return step, trial, S_trial


def minimize_nehari(
    params: Params,
    init: Field | None = None,
    opts: SolverOptions = SolverOptions(),
    grid: Grid | None = None,
) -> GroundStateResult:
    """Minimize the action over the Nehari manifold.

    Each iteration takes the modulus of the iterate, steps along the
    descent direction built from the preconditioned gradient
    ``(A + omega)^{-1} S'(u)`` (nonlinear conjugate gradients, Polak-Ribiere+)
    with Armijo backtracking on the projected action, and re-projects onto
    the manifold.
    Convergence is declared when ``||S'(u)||_{L^2} <= tol * ||u||_{H^1}``.
    """
    if init is None:
        if grid is None:
            raise ValueError("need an initial field or a grid")
        init = default_init(grid, params)
    grid = init.grid
    if not np.any(init.values):
        raise ValueError("initial field is zero")
    V = _potential(grid, params.c)
    h = grid.h
    diag, off = linear_operator_bands(grid, params.c)
    precond = _SPDTridiag(diag + params.omega, off)

    u, S = _project_real(np.abs(init.values), grid, V, params)
    history = [S]
    residual = math.inf
    converged = False
    d = g_prev = z_prev = None
    it = 0
    for it in range(1, opts.max_iters + 1):
        g = _apply_A(u, grid, V) + params.omega * u - np.abs(u) ** (params.p - 1) * u
        residual = _l2(g, h)
        if residual <= opts.tol_residual * h1_norm(Field(grid, u)):
            converged = True
            break
        z = precond.solve(g)
        # Polak-Ribiere+ in the preconditioned metric, restarted on non-descent
        if d is None:
            d = -z
        else:
            beta = max(0.0, float(g @ (z - z_prev)) / float(g_prev @ z_prev))
            d = -z + beta * d
            if float(g @ d) >= 0:
                d = -z
        slope = h * float(g @ d)
        step, trial, S_trial = _line_search(u, S, d, slope, grid, V, params, opts)
        if S_trial > S + 2 * _ROUNDOFF * abs(S):
            if np.array_equal(d, -z):
                log.debug("line search stalled at iteration %d", it)
                break
            d = None
            continue
        u, S = trial, S_trial
        history.append(S)
        g_prev, z_prev = g, z
    else:
        it = opts.max_iters
    if not converged:
        log.warning("Nehari descent stopped after %d iterations, residual %.3e", it, residual)

    profile = Field(grid, u)
    res = GroundStateResult(
        profile=profile,
        params=params,
        level_m=S,
        mu=h * float(u @ u),
        iterations=it,
        residual=residual,
        converged=converged,
        method="nehari",
        history=history,
    )
    res.identity_report = verify_ground_state(res)
    return res


def normalized_gradient_flow(
    params: Params,
    mu: float,
    init: Field | None = None,
    opts: SolverOptions = SolverOptions(),
    grid: Grid | None = None,
    tau: float = 0.9,
    crosscheck: bool = False,
) -> GroundStateResult:
    """Minimize E on the sphere ``mass = mu`` by normalized imaginary time.

    Backward-Euler step with the linear part and the frozen nonlinear
    coefficient treated implicitly, then rescaling to mass ``mu``. The
    Lagrange frequency is ``omega_out = (lp1 - H) / mass``. ``params.omega``
    is only used by the optional cross-check, which reruns the Nehari
    descent at ``omega_out``.
    """
    if not 1 < params.p < 5:
        raise ValueError("the constrained energy problem is only posed for 1 < p < 5")
    if not mu > 0:
        raise ValueError("mass must be positive")
    if init is None:
        if grid is None:
            raise ValueError("need an initial field or a grid")
        # from L/3 the flow crawls toward the origin; start close to it instead
        init = default_init(grid, params) if grid.kind is GridKind.FULL_LINE else near_origin_init(grid, params)
    grid = init.grid
    if not np.any(init.values):
        raise ValueError("initial field is zero")
    h = grid.h
    V = _potential(grid, params.c)
    diag, off = linear_operator_bands(grid, params.c)
    p = params.p

    u = np.abs(init.values)
    u *= math.sqrt(mu / (h * float(u @ u)))
    residual = math.inf
    converged = False
    omega_out = float("nan")
    it = 0
    for it in range(1, opts.max_iters + 1):
        H, M, P = _parts_real(u, grid, V, p)
        omega_out = (P - H) / M
        nl = np.abs(u) ** (p - 1)
        grad = _apply_A(u, grid, V) - nl * u + omega_out * u
        residual = _l2(grad, h)
        if residual <= opts.tol_residual * h1_norm(Field(grid, u)):
            converged = True
            break
        # keep the system positive definite: tau * (lowest eigenvalue ~ -omega_out) > -1
        dt = tau / max(omega_out, 1e-3)
        d_it, e_it, info = lapack.dpttrf(1.0 + dt * (diag - nl), dt * off)
        if info != 0:
            tau *= 0.5
            continue
        v, info = lapack.dpttrs(d_it, e_it, u)
        v = np.abs(v)
        u = v * math.sqrt(mu / (h * float(v @ v)))
    else:
        it = opts.max_iters
    if not converged:
        log.warning("normalized flow stopped after %d iterations, residual %.3e", it, residual)

    prof = Field(grid, u)
    H, M, P = _parts_real(u, grid, V, p)
    E = 0.5 * H - P / (p + 1)
    run_params = params.with_(omega=omega_out)
    res = GroundStateResult(
        profile=prof,
        params=run_params,
        level_m=E + 0.5 * omega_out * M,
        mu=M,
        iterations=it,
        residual=residual,
        converged=converged,
        level_I=E,
        omega_out=omega_out,
        method="normalized_flow",
    )
    res.identity_report = verify_ground_state(res)
    if crosscheck:
        other = minimize_nehari(run_params, init=prof, opts=opts)
        res.identity_report["nehari_crosscheck_h1"] = orbital_distance(prof, other.profile).dist
        res.identity_report["nehari_crosscheck_level"] = abs(other.level_m - res.level_m) / abs(res.level_m)
    return res


def verify_ground_state(result: GroundStateResult) -> dict:
    """Relative residuals of the identities every ground state satisfies."""
    params = result.params
    p, w = params.p, params.omega
    P = parts(result.profile, params)
    H = P.hardy(params.c)
    m = 0.5 * H + 0.5 * w * P.mass - P.lp1 / (p + 1)
    J = H + w * P.mass - P.lp1
    r2 = H - params.pohozaev_coef * P.lp1
    return {
        "id1": abs(J) / (H + w * P.mass),
        "pohozaev": abs(r2) / H,
        "cs1": abs(w * P.mass - (p + 3) / (2 * (p + 1)) * P.lp1) / (w * P.mass),
        "mass_formula": abs(P.mass - m / w * (p + 3) / (p - 1)) / P.mass,
        "lp1_formula": abs(P.lp1 - 2 * (p + 1) / (p - 1) * m) / P.lp1,
        "hardy_formula": abs(H - m) / m,
        "J": J,
        "r2": r2,
    }


IDENTITY_KEYS = ("id1", "pohozaev", "cs1", "mass_formula", "lp1_formula", "hardy_formula")


def identities_pass(report: dict, tol: float) -> bool:
    return all(report[k] <= tol for k in IDENTITY_KEYS)


# ---------------------------------------------------------------------------
# scaling curve


def lambda_star(u: Field, params: Params) -> float:
    """Root of lam -> Q(u_lam) = lam^2 H(u) - lam^((p-1)/2) B for p != 5,
    with B = (p-1)/(2(p+1)) ||u||_{p+1}^{p+1}."""
    P = parts(u, params)
    A = P.hardy(params.c)
    B = params.pohozaev_coef * P.lp1
    if not B > 0:
        raise ValueError("need a nonzero field")
    if params.p == 5:
        if math.isclose(A, B, rel_tol=1e-12):
            return 1.0
        raise ValueError("at p = 5 Q(u_lam) = lam^2 Q(u) has no root unless Q(u) = 0")
    return (A / B) ** (2.0 / (params.p - 5))


def scaling_action(u: Field, params: Params, lam: float) -> float:
    """S(u_lam) from the homogeneity of each term, without interpolation."""
    P = parts(u, params)
    return (
        0.5 * lam**2 * P.hardy(params.c)
        + 0.5 * params.omega * P.mass
        - lam ** ((params.p - 1) / 2) * P.lp1 / (params.p + 1)
    )


def scaled(u: Field, lam: float) -> Field:
    return rescale(u, lam)
