"""Strang split-step integration of ``i u_t + u'' + c u/x^2 + |u|^{p-1} u = 0``.

The linear singular part goes through Crank-Nicolson (a Cayley transform of
a real symmetric tridiagonal, hence unitary for the grid quadrature), the
nonlinear part is integrated exactly as a pointwise phase rotation. Both
sub-steps preserve mass to round-off.
"""

from __future__ import annotations

import csv
import enum
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.linalg import lapack

from hardy_nls.functionals import CSV_COLUMNS, DiagnosticsRecord, Params, diagnostics
from hardy_nls.grid import Field, Grid, GridKind
from hardy_nls.groundstate import linear_operator_bands

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1


class Status(str, enum.Enum):
    COMPLETED = "Completed"
    BLOWUP = "BlowupDetected"
    DIVERGED = "Diverged"


class _CrankNicolson:
    """Factored ``I + i tau/2 A`` for one grid, potential strength and tau."""

    def __init__(self, grid: Grid, c: float, tau: float):
        if grid.kind is GridKind.FULL_LINE and c != 0:
            raise ValueError("c > 0 requires a half-line grid")
        diag, off = linear_operator_bands(grid, c)
        self.grid, self.tau = grid, tau
        self._diag = diag
        self._off = off[0] if off.size else 0.0
        a = 0.5j * tau
        dl, d, du, du2, ipiv, info = lapack.zgttrf(
            (a * off).astype(complex), 1.0 + a * diag, (a * off).astype(complex)
        )
        if info != 0:
            raise np.linalg.LinAlgError(f"Crank-Nicolson matrix is singular (info={info})")
        self._lu = (dl, d, du, du2, ipiv)

    def __call__(self, u: np.ndarray) -> np.ndarray:
        a = 0.5j * self.tau
        Au = self._diag * u
        Au[1:] += self._off * u[:-1]
        Au[:-1] += self._off * u[1:]
        rhs = u - a * Au
        x, info = lapack.zgttrs(*self._lu, rhs)
        if info != 0:
            raise np.linalg.LinAlgError(f"zgttrs failed (info={info})")
        return x


@lru_cache(maxsize=32)
def _cn(grid: Grid, c: float, tau: float) -> _CrankNicolson:
    return _CrankNicolson(grid, c, tau)


def linear_half_step(u: Field, dt: float, params: Params) -> Field:
    """Advance ``i u_t = A u`` by ``dt`` with Crank-Nicolson,
    ``A = -Lap_h - c/x^2``."""
    return Field(u.grid, _cn(u.grid, params.c, dt)(np.array(u.values)))


def nonlinear_step(u: Field, dt: float, p: float) -> Field:
    """Exact flow of ``i u_t = -|u|^{p-1} u``: a pointwise phase rotation."""
    v = u.values
    return Field(u.grid, v * np.exp(1j * dt * np.abs(v) ** (p - 1)))


@dataclass(frozen=True)
class EvolveOptions:
    cadence: int = 10
    blowup_factor: float = 10.0
    snapshot_every: Optional[int] = None
    mass_step_tol: float = 1e-10
    energy_tol: float = 1e-3
    min_dt: float = 1e-7
    boundary_tol: float = 1e-8
    reference: Optional[Field] = None

    def __post_init__(self):
        if self.cadence < 1:
            raise ValueError("cadence must be a positive step count")
        if not self.blowup_factor > 1:
            raise ValueError("blow-up factor must exceed 1")


@dataclass
class EvolutionTrace:
    params: Params
    grid: Grid
    dt: float
    records: list[DiagnosticsRecord]
    status: Status
    snapshots: list[tuple[float, Field]] = field(default_factory=list)
    t_star: Optional[float] = None
    resolution_loss_t: Optional[float] = None
    boundary_t: Optional[float] = None
    dt_halvings: list[float] = field(default_factory=list)
    final: Optional[Field] = None

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    @property
    def t(self) -> np.ndarray:
        return self.column("t")

    def write_csv(self, path: Path | str) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(f"# schema_version={SCHEMA_VERSION}\n")
            w = csv.writer(fh)
            w.writerow(CSV_COLUMNS)
            for r in self.records:
                w.writerow(r.to_row())

    def write_snapshots(self, directory: Path | str, stem: str = "snapshot") -> list[Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        paths = []
        for k, (t, f) in enumerate(self.snapshots):
            path = directory / f"{stem}_{k:05d}.csv"
            header = (
                f"t={t!r} p={self.params.p!r} c={self.params.c!r} omega={self.params.omega!r} "
                f"kind={self.grid.kind.value} L={self.grid.L!r} N={self.grid.N} "
                f"schema_version={SCHEMA_VERSION}\nx,re,im"
            )
            np.savetxt(
                path,
                np.column_stack([self.grid.nodes, f.values.real, f.values.imag]),
                delimiter=",",
                header=header,
                comments="# ",
                fmt="%.17g",
            )
            paths.append(path)
        return paths


def read_trace_csv(path: Path | str) -> list[DiagnosticsRecord]:
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(line for line in fh if not line.startswith("#"))]
    if tuple(rows[0]) != CSV_COLUMNS:
        raise ValueError("unexpected trace header")
    return [DiagnosticsRecord.from_row(r) for r in rows[1:]]


def evolve(u0: Field, params: Params, T: float, dt: float, opts: EvolveOptions = EvolveOptions()) -> EvolutionTrace:
    """Strang splitting ``L(dt/2) N(dt) L(dt/2)`` from t = 0 to T.

    Records diagnostics every ``opts.cadence`` steps. The run halts with
    ``BlowupDetected`` once ``||u'||^2`` exceeds ``blowup_factor`` times its
    initial value, and with ``Diverged`` on a non-finite state. When one
    step changes the mass by more than ``mass_step_tol`` (relative) the step
    is redone with dt/2 and ``resolution_loss_t`` is set; the record spacing
    in time is kept fixed. ``resolution_loss_t`` is also set once the energy
    drifts by more than ``energy_tol`` (relative), and ``boundary_t`` once
    more than ``boundary_tol`` of the mass sits within 0.1 L of the
    truncation boundary.

    The equation is time-reversible through complex conjugation, so the
    backward flow is ``conj(evolve(conj(u0)))``.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if not T >= 0:
        raise ValueError("T must be non-negative")
    grid = u0.grid
    n_steps = int(round(T / dt))
    ref = opts.reference
    p = params.p

    u = np.array(u0.values)
    h = grid.h
    rec0 = diagnostics(u0, params, 0.0, ref)
    records = [rec0]
    snapshots = []
    if opts.snapshot_every:
        snapshots.append((0.0, u0))
    grad0 = rec0.grad_norm_sq
    energy0 = rec0.energy
    status = Status.COMPLETED
    t_star = None
    resolution_loss_t = None
    halvings: list[float] = []
    boundary_t = None
    # truncation boundary only; the origin of the half-line is physical
    edge = np.abs(grid.nodes) > 0.9 * grid.L

    cur_dt = dt
    sub = 1  # substeps per nominal step
    t = 0.0
    step = 0
    last_good = u.copy()
    while step < n_steps:
        lin = _cn(grid, params.c, cur_dt / 2)
        mass_before = h * float(np.vdot(u, u).real)
        v = u
        for _ in range(sub):
            v = lin(v)
            v = v * np.exp(1j * cur_dt * np.abs(v) ** (p - 1))
            v = lin(v)
        if not np.all(np.isfinite(v)):
            status = Status.DIVERGED
            u = last_good
            break
        mass_after = h * float(np.vdot(v, v).real)
        if mass_before > 0 and abs(mass_after - mass_before) > opts.mass_step_tol * mass_before:
            if cur_dt / 2 >= opts.min_dt:
                cur_dt /= 2
                sub *= 2
                halvings.append(t)
                if resolution_loss_t is None:
                    resolution_loss_t = t
                log.info("mass drift %.2e at t=%.4g, halving dt to %.3g", mass_after / mass_before - 1, t, cur_dt)
                continue
        u = v
        last_good = u
        step += 1
        t = step * dt
        grad = h * float(np.sum(np.abs(np.diff(np.concatenate(([0.0], u, [0.0])))) ** 2)) / h**2
        blown = grad0 > 0 and grad > opts.blowup_factor * grad0
        if step % opts.cadence == 0 or blown or step == n_steps:
            f = Field(grid, u)
            rec = diagnostics(f, params, t, ref)
            records.append(rec)
            if resolution_loss_t is None and energy0 != 0 and abs(rec.energy - energy0) > opts.energy_tol * max(abs(energy0), 1e-300):
                resolution_loss_t = t
            if boundary_t is None and h * float(np.sum(np.abs(u[edge]) ** 2)) > opts.boundary_tol * rec.mass:
                boundary_t = t
                log.warning("boundary mass above %.0e of total at t=%.4g", opts.boundary_tol, t)
            if opts.snapshot_every and step % opts.snapshot_every == 0:
                snapshots.append((t, f))
        if blown:
            status = Status.BLOWUP
            t_star = t
            break

    return EvolutionTrace(
        params=params,
        grid=grid,
        dt=dt,
        records=records,
        status=status,
        snapshots=snapshots,
        t_star=t_star,
        resolution_loss_t=resolution_loss_t,
        boundary_t=boundary_t,
        dt_halvings=halvings,
        final=Field(grid, u),
    )


# ---------------------------------------------------------------------------
# post-processing


@dataclass(frozen=True)
class BlowupThresholds:
    growth_factor: float = 10.0
    fit_factor: float = 3.0


@dataclass
class BlowupReport:
    detected: bool
    t_star: Optional[float]
    growth_curve: list[tuple[float, float]]
    virial_fit: tuple[float, float, float]
    fit_window: tuple[float, float]
    virial_root: Optional[float]

    @property
    def curvature(self) -> float:
        """Second time derivative of the fitted quadratic."""
        return 2.0 * self.virial_fit[0]


def detect_blowup(trace: EvolutionTrace, thresholds: BlowupThresholds = BlowupThresholds()) -> BlowupReport:
    """Threshold test on ``||u'||^2`` plus a quadratic fit of ``||xu||^2``.

    The fit uses the records before the gradient norm first exceeds
    ``fit_factor`` times its initial value.
    """
    t = trace.t
    grad = trace.column("grad_norm_sq")
    moment = trace.column("virial_moment")
    g0 = grad[0]
    crossed = np.nonzero(grad > thresholds.growth_factor * g0)[0] if g0 > 0 else np.array([], dtype=int)
    detected = crossed.size > 0
    t_star = float(t[crossed[0]]) if detected else None

    early = np.nonzero(grad > thresholds.fit_factor * g0)[0] if g0 > 0 else np.array([], dtype=int)
    stop = early[0] if early.size else len(t)
    stop = max(stop, min(3, len(t)))
    if stop >= 3:
        coef = np.polyfit(t[:stop], moment[:stop], 2)
    else:
        coef = np.array([np.nan, np.nan, np.nan])
    a, b, c0 = (float(v) for v in coef)
    root = None
    if np.isfinite(a) and a < 0:
        disc = b * b - 4 * a * c0
        if disc >= 0:
            roots = [(-b + s * math.sqrt(disc)) / (2 * a) for s in (1, -1)]
            pos = [r for r in roots if r > 0]
            root = min(pos) if pos else None
    return BlowupReport(
        detected=detected,
        t_star=t_star,
        growth_curve=list(zip(t.tolist(), grad.tolist())),
        virial_fit=(a, b, c0),
        fit_window=(float(t[0]), float(t[stop - 1])),
        virial_root=root,
    )


@dataclass
class VirialReport:
    times: np.ndarray
    second_diff: np.ndarray
    eight_q: np.ndarray
    first_diff: np.ndarray
    flux: np.ndarray

    @property
    def abs_err_second(self) -> float:
        return float(np.max(np.abs(self.second_diff - self.eight_q)))

    @property
    def abs_err_first(self) -> float:
        return float(np.max(np.abs(self.first_diff - self.flux)))

    @property
    def rel_err_second(self) -> float:
        return self.abs_err_second / float(np.max(np.abs(self.eight_q)))

    @property
    def rel_err_first(self) -> float:
        return self.abs_err_first / float(np.max(np.abs(self.flux)))


def track_virial(trace: EvolutionTrace, upto: Optional[float] = None) -> VirialReport:
    """Compare finite differences of ``||xu||^2`` with the virial identities.

    Central differences at interior records: the second difference against
    ``8 Q`` and the first difference against the flux ``4 Im int conj(u) x u'``.
    Records must be uniformly spaced; ``upto`` truncates the series.
    """
    recs = trace.records
    if upto is not None:
        recs = [r for r in recs if r.t <= upto]
    if len(recs) < 3:
        raise ValueError("need at least three records")
    t = np.array([r.t for r in recs])
    spacing = np.diff(t)
    if not np.allclose(spacing, spacing[0], rtol=1e-9, atol=1e-12):
        raise ValueError("records are not uniformly spaced")
    d = spacing[0]
    M = np.array([r.virial_moment for r in recs])
    Q = np.array([r.Q for r in recs])
    F = np.array([r.virial_flux for r in recs])
    return VirialReport(
        times=t[1:-1],
        second_diff=(M[2:] - 2 * M[1:-1] + M[:-2]) / d**2,
        eight_q=8.0 * Q[1:-1],
        first_diff=(M[2:] - M[:-2]) / (2 * d),
        flux=F[1:-1],
    )
