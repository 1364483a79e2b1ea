"""Named experiments binding the solvers, the time stepper and the oracles.

Each scenario reads a :class:`RunConfig`, writes its results under
``<output_dir>/<scenario>/`` and returns a :class:`ScenarioResult` holding
a list of checks. A check passes when ``value <= bound`` (or ``<``); the
verdict line reports the largest ``value / bound`` over checks with a
positive bound, so PASS implies a reported residual of at most 1.
"""

from __future__ import annotations

import csv
import enum
import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from hardy_nls import dynamics as dyn
from hardy_nls import functionals as fn
from hardy_nls import groundstate as gs
from hardy_nls import soliton as sol
from hardy_nls.functionals import Params
from hardy_nls.grid import Field, Grid, GridKind, make_grid, rescale

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1


class Scenario(str, enum.Enum):
    GROUND_STATE = "GroundState"
    EVOLVE = "Evolve"
    STABILITY = "Stability"
    BLOWUP_CRITICAL = "BlowupCritical"
    BLOWUP_SUPERCRITICAL = "BlowupSupercritical"
    NEGATIVE_ENERGY_BLOWUP = "NegativeEnergyBlowup"
    COMPARE_INFINITY = "CompareInfinity"
    VERIFY_IDENTITIES = "VerifyIdentities"


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class GridSpec:
    kind: str = "HalfLine"
    L: float = 40.0
    N: int = 8192

    def build(self) -> Grid:
        return make_grid(self.kind, self.L, self.N)


@dataclass(frozen=True)
class DynamicsSpec:
    T: float = 10.0
    dt: float = 1e-3
    cadence: int = 100
    blowup_factor: float = 10.0
    snapshot_every: Optional[int] = None
    halving_check: bool = False


@dataclass(frozen=True)
class PerturbationSpec:
    """``bumps`` smooth bumps with seeded centers, widths and complex
    amplitudes; the sum is scaled to ``amplitude * ||phi||_{H^1}``."""

    amplitude: float = 0.01
    bumps: int = 3


@dataclass(frozen=True)
class InitialSpec:
    """Initial datum for the Evolve scenario: the ground state, or a
    Gaussian ``a exp(-(x-x0)^2 / (2 w^2)) exp(i k x)`` cut at the origin."""

    kind: str = "GroundState"
    amplitude: float = 1.2
    center: float = 6.0
    width: float = 1.0
    velocity: float = 0.5


_SOLVER_FIELDS = {f.name for f in fields(gs.SolverOptions)}


@dataclass(frozen=True)
class RunConfig:
    scenario: Scenario
    params: Params
    grid: GridSpec = GridSpec()
    solver: gs.SolverOptions = gs.SolverOptions()
    dynamics: DynamicsSpec = DynamicsSpec()
    perturbation: PerturbationSpec = PerturbationSpec()
    initial: InitialSpec = InitialSpec()
    scaling_lambda: float = 1.05
    epsilon: float = 0.01
    mu: Optional[float] = None
    separations: tuple = (4.0, 6.0, 8.0)
    appendix_separations: tuple = (3.0, 5.0, 8.0)
    c_values: tuple = ()
    tol: float = 1e-3
    stability_factor: float = 5.0
    random_fields: int = 5
    output_dir: str = "out"
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "scenario", Scenario(self.scenario))
        for name in ("separations", "appendix_separations", "c_values"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        self.validate()

    def validate(self) -> None:
        s, p = self.scenario, self.params
        kind = GridKind(self.grid.kind)
        if p.c > 0 and kind is not GridKind.HALF_LINE:
            raise ConfigError("c > 0 needs a half-line grid")
        if not self.tol > 0:
            raise ConfigError("tol must be positive")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if s is Scenario.STABILITY and not p.p < 5:
            raise ConfigError("orbital stability is only asserted for 1 < p < 5")
        if s is Scenario.BLOWUP_CRITICAL and p.p != 5:
            raise ConfigError("BlowupCritical needs p = 5")
        if s is Scenario.BLOWUP_SUPERCRITICAL:
            if not p.p > 5:
                raise ConfigError("BlowupSupercritical needs p > 5")
            if not self.scaling_lambda > 1:
                raise ConfigError("the unstable direction of the scaling curve is lambda > 1")
        if s is Scenario.COMPARE_INFINITY:
            if not 0 < p.c < 0.25:
                raise ConfigError("CompareInfinity needs 0 < c < 1/4")
            if not p.p < 5:
                raise ConfigError("the constrained energy comparison needs 1 < p < 5")
            if any(not 0 < c < 0.25 for c in self.c_values):
                raise ConfigError("c_values must lie in (0, 1/4)")
        if s in (Scenario.BLOWUP_CRITICAL, Scenario.BLOWUP_SUPERCRITICAL, Scenario.NEGATIVE_ENERGY_BLOWUP, Scenario.STABILITY, Scenario.EVOLVE):
            if kind is not GridKind.HALF_LINE:
                raise ConfigError(f"{s.value} runs on the half-line")
        if self.initial.kind not in ("GroundState", "Gaussian"):
            raise ConfigError(f"unknown initial datum {self.initial.kind!r}")
        if self.mu is not None and not self.mu > 0:
            raise ConfigError("mu must be positive")

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "scenario": self.scenario.value,
            "params": self.params.to_dict(),
            "grid": asdict(self.grid),
            "solver": asdict(self.solver),
            "dynamics": asdict(self.dynamics),
            "perturbation": asdict(self.perturbation),
            "initial": asdict(self.initial),
            "scaling_lambda": self.scaling_lambda,
            "epsilon": self.epsilon,
            "mu": self.mu,
            "separations": list(self.separations),
            "appendix_separations": list(self.appendix_separations),
            "c_values": list(self.c_values),
            "tol": self.tol,
            "stability_factor": self.stability_factor,
            "random_fields": self.random_fields,
            "output_dir": self.output_dir,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        doc = dict(doc)
        version = doc.pop("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema version {version}")
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        for key in ("scenario", "params"):
            if key not in doc:
                raise ConfigError(f"missing required key {key!r}")
        try:
            doc["params"] = Params(**doc["params"])
            for key, typ in (("grid", GridSpec), ("dynamics", DynamicsSpec), ("perturbation", PerturbationSpec), ("initial", InitialSpec)):
                if key in doc:
                    doc[key] = typ(**doc[key])
            if "solver" in doc:
                bad = set(doc["solver"]) - _SOLVER_FIELDS
                if bad:
                    raise ConfigError(f"unknown solver options: {sorted(bad)}")
                doc["solver"] = gs.SolverOptions(**doc["solver"])
            return cls(**doc)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        return cls.from_dict(doc)

    @classmethod
    def load(cls, path: Path | str) -> "RunConfig":
        return cls.from_json(Path(path).read_text())


# ---------------------------------------------------------------------------
# results


@dataclass
class Check:
    name: str
    value: float
    bound: float
    strict: bool = False

    @property
    def passed(self) -> bool:
        if not math.isfinite(self.value):
            return False
        return self.value < self.bound if self.strict else self.value <= self.bound

    @property
    def ratio(self) -> Optional[float]:
        return self.value / self.bound if self.bound > 0 and math.isfinite(self.value) else None


@dataclass
class ScenarioResult:
    scenario: Scenario
    checks: list[Check] = field(default_factory=list)
    data: dict = field(default_factory=dict)
    out_dir: Optional[Path] = None

    def add(self, name: str, value: float, bound: float, strict: bool = False) -> Check:
        c = Check(name, float(value), float(bound), strict)
        self.checks.append(c)
        return c

    def flag(self, name: str, ok: bool) -> Check:
        """A yes/no check, stored as ``0 <= 0`` or ``1 <= 0``."""
        return self.add(name, 0.0 if ok else 1.0, 0.0)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def max_residual(self) -> float:
        ratios = [c.ratio for c in self.checks if c.ratio is not None]
        if any(not c.passed and c.ratio is None for c in self.checks):
            return math.inf
        return max(ratios, default=0.0)

    def verdict(self) -> str:
        return f"RESULT {self.scenario.value} {'PASS' if self.passed else 'FAIL'} {self.max_residual!r}"

    def write_checks(self, path: Path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(f"# schema_version={SCHEMA_VERSION}\n")
            w = csv.writer(fh)
            w.writerow(["check", "value", "bound", "relation", "passed"])
            for c in self.checks:
                w.writerow([c.name, repr(c.value), repr(c.bound), "<" if c.strict else "<=", c.passed])


def _write_json(path: Path, doc: dict) -> None:
    path.write_text(json.dumps({"schema_version": SCHEMA_VERSION, **doc}, indent=2, default=_jsonable))


def _jsonable(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, enum.Enum):
        return o.value
    raise TypeError(f"cannot serialize {type(o)}")


def _write_table(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema_version={SCHEMA_VERSION}\n")
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])


# ---------------------------------------------------------------------------
# shared building blocks


def ground_state(cfg: RunConfig, params: Optional[Params] = None) -> gs.GroundStateResult:
    params = params or cfg.params
    res = gs.minimize_nehari(params, opts=cfg.solver, grid=cfg.grid.build())
    if not res.converged:
        log.warning("Nehari descent stopped after %d iterations, residual %.2e", res.iterations, res.residual)
    return res


def smooth_bumps(grid: Grid, rng: np.random.Generator, count: int) -> np.ndarray:
    """Sum of ``count`` Gaussian bumps with random complex amplitudes,
    multiplied by ``1 - exp(-x)`` so the Dirichlet condition at the origin
    holds to all orders of the grid."""
    x = grid.nodes
    span = 0.25 * grid.L
    out = np.zeros(grid.size, dtype=complex)
    for _ in range(count):
        x0 = rng.uniform(1.0, span)
        w = rng.uniform(0.5, 2.0)
        a = complex(rng.normal(), rng.normal())
        out += a * np.exp(-((x - x0) ** 2) / (2 * w * w))
    if grid.kind is GridKind.HALF_LINE:
        out *= 1 - np.exp(-x)
    return out


def perturbation(phi: Field, spec: PerturbationSpec, seed: int) -> Field:
    rng = np.random.default_rng(seed)
    raw = Field(phi.grid, smooth_bumps(phi.grid, rng, spec.bumps))
    return raw * (spec.amplitude * fn.h1_norm(phi) / fn.h1_norm(raw))


def gaussian(grid: Grid, spec: InitialSpec) -> Field:
    x = grid.nodes
    v = spec.amplitude * np.exp(-((x - spec.center) ** 2) / (2 * spec.width**2)) * np.exp(1j * spec.velocity * x)
    return Field(grid, v * (1 - np.exp(-x)))


def _evolve_opts(cfg: RunConfig, **kw) -> dyn.EvolveOptions:
    d = cfg.dynamics
    return dyn.EvolveOptions(cadence=d.cadence, blowup_factor=d.blowup_factor, snapshot_every=d.snapshot_every, **kw)


def _scenario_dir(cfg: RunConfig, out: Optional[Path]) -> Path:
    base = Path(out) if out is not None else Path(cfg.output_dir)
    path = base / cfg.scenario.value
    path.mkdir(parents=True, exist_ok=True)
    return path


def _drifts(trace: dyn.EvolutionTrace) -> tuple[float, float]:
    m = trace.column("mass")
    e = trace.column("energy")
    mass_drift = float(np.max(np.abs(m - m[0]))) / m[0] if m[0] > 0 else 0.0
    e_scale = abs(e[0]) if e[0] != 0 else 1.0
    return mass_drift, float(np.max(np.abs(e - e[0]))) / e_scale


# ---------------------------------------------------------------------------
# scenarios


def cmd_groundstate(cfg: RunConfig, out: Optional[Path] = None) -> ScenarioResult:
    d = _scenario_dir(cfg, out)
    res = ScenarioResult(cfg.scenario, out_dir=d)
    p = cfg.params
    gsr = ground_state(cfg)
    gsr.save(d / "groundstate.json", d / "profile.csv")
    rep = gsr.identity_report
    res.flag("nehari_converged", gsr.converged)
    for k in gs.IDENTITY_KEYS:
        res.add(k, rep[k], cfg.tol)
    res.data.update(level_m=gsr.level_m, mass=gsr.mu, iterations=gsr.iterations)

    if GridKind(cfg.grid.kind) is GridKind.HALF_LINE:
        m_inf = sol.infinity_level(p.p, p.omega)
        res.data.update(m_inf=m_inf, gap=m_inf - gsr.level_m)
        if p.c > 0:
            res.add("m_below_m_inf", gsr.level_m - m_inf, 0.0, strict=True)
    else:
        m_inf = sol.infinity_level(p.p, p.omega)
        res.data["m_inf"] = m_inf
        res.add("level_vs_m_inf", abs(gsr.level_m - m_inf), 2e-3)
        q = sol.soliton_field(gsr.grid, p.p, p.omega)
        res.data["soliton_h1_distance"] = fn.orbital_distance(gsr.profile, q).dist
        res.add("soliton_h1_distance", res.data["soliton_h1_distance"], 1e-2)

    if p.p < 5:
        flow = gs.normalized_gradient_flow(p, gsr.mu, opts=cfg.solver, grid=gsr.grid)
        flow.save(d / "flow.json", d / "flow_profile.csv")
        dist = fn.orbital_distance(flow.profile, gsr.profile).dist
        res.flag("flow_converged", flow.converged)
        res.add("flow_vs_nehari_h1", dist, cfg.tol)
        res.add("flow_omega", abs(flow.omega_out - p.omega) / p.omega, cfg.tol)
        res.data.update(flow_level_I=flow.level_I, flow_omega=flow.omega_out, flow_h1_distance=dist)

    _write_json(d / "identities.json", {"params": p.to_dict(), "identities": rep, **res.data})
    return res


def _standing_wave_checks(res: ScenarioResult, trace: dyn.EvolutionTrace, phi: Field, tol: float) -> None:
    od = trace.column("orbital_dist")
    res.add("max_orbital_distance", float(np.max(od)), tol)
    mod = max(float(np.max(np.abs(np.abs(f.values) - np.abs(phi.values)))) for _, f in trace.snapshots)
    res.add("max_modulus_deviation", mod, tol)
    vr = dyn.track_virial(trace)
    scale = float(np.max(trace.column("grad_norm_sq")))
    res.add("virial_second_vs_8Q", vr.abs_err_second / scale, tol)
    res.add("virial_first_vs_flux", vr.abs_err_first / scale, tol)


def cmd_evolve(cfg: RunConfig, out: Optional[Path] = None) -> ScenarioResult:
    d = _scenario_dir(cfg, out)
    res = ScenarioResult(cfg.scenario, out_dir=d)
    p, dy = cfg.params, cfg.dynamics
    grid = cfg.grid.build()
    standing = cfg.initial.kind == "GroundState"
    if standing:
        phi = ground_state(cfg).profile
        u0 = phi
        opts = dyn.EvolveOptions(
            cadence=dy.cadence,
            blowup_factor=dy.blowup_factor,
            snapshot_every=dy.snapshot_every or dy.cadence,
            reference=phi,
        )
    else:
        u0 = gaussian(grid, cfg.initial)
        opts = _evolve_opts(cfg)
    trace = dyn.evolve(u0, p, dy.T, dy.dt, opts)
    trace.write_csv(d / "trace.csv")
    if dy.snapshot_every:
        trace.write_snapshots(d / "snapshots")
    mass_drift, energy_drift = _drifts(trace)
    res.flag("completed", trace.status is dyn.Status.COMPLETED)
    res.add("mass_drift", mass_drift, 1e-10)
    res.add("energy_drift", energy_drift, 1e-5)
    res.data.update(status=trace.status.value, mass_drift=mass_drift, energy_drift=energy_drift, boundary_t=trace.boundary_t)
    if standing:
        _standing_wave_checks(res, trace, phi, cfg.tol)
    else:
        vr = dyn.track_virial(trace)
        res.add("virial_second_rel", vr.rel_err_second, 1e-2)
        res.add("virial_first_rel", vr.rel_err_first, 1e-2)
        res.data.update(virial_second_rel=vr.rel_err_second, virial_first_rel=vr.rel_err_first)
        if dy.halving_check:
            half = dyn.evolve(u0, p, dy.T, dy.dt / 2, _evolve_opts(cfg))
            vh = dyn.track_virial(half)
            r2 = vr.rel_err_second / vh.rel_err_second
            r1 = vr.rel_err_first / vh.rel_err_first
            res.data.update(virial_second_ratio=r2, virial_first_ratio=r1)
            for name, r in (("virial_second_halving", r2), ("virial_first_halving", r1)):
                res.add(name + "_low", 3.5 - r, 0.0)
                res.add(name + "_high", r, 4.5)
    _write_json(d / "summary.json", {"params": p.to_dict(), "grid": grid.to_dict(), **res.data})
    return res


def cmd_stability(cfg: RunConfig, out: Optional[Path] = None) -> ScenarioResult:
    d = _scenario_dir(cfg, out)
    res = ScenarioResult(cfg.scenario, out_dir=d)
    p, dy = cfg.params, cfg.dynamics
    phi = ground_state(cfg).profile
    u0 = phi + perturbation(phi, cfg.perturbation, cfg.seed) if cfg.perturbation.amplitude > 0 else phi
    trace = dyn.evolve(u0, p, dy.T, dy.dt, dyn.EvolveOptions(cadence=dy.cadence, blowup_factor=dy.blowup_factor, reference=phi))
    trace.write_csv(d / "trace.csv")
    t = trace.t
    dist = trace.column("orbital_dist")
    theta = trace.column("theta_star")
    _write_table(d / "orbital_distance.csv", ["t", "orbital_dist", "theta_star"], zip(t, dist, theta))
    res.flag("completed", trace.status is dyn.Status.COMPLETED)
    if cfg.perturbation.amplitude > 0:
        res.add("max_over_initial_distance", float(np.max(dist)) / dist[0], cfg.stability_factor)
    else:
        res.add("max_orbital_distance", float(np.max(dist)), cfg.tol)
    res.data.update(initial_distance=float(dist[0]), max_distance=float(np.max(dist)), boundary_t=trace.boundary_t)
    _write_json(d / "summary.json", {"params": p.to_dict(), **res.data})
    return res


def _blowup_common(res: ScenarioResult, cfg: RunConfig, d: Path, u0: Field) -> tuple[dyn.EvolutionTrace, dyn.BlowupReport]:
    p, dy = cfg.params, cfg.dynamics
    trace = dyn.evolve(u0, p, dy.T, dy.dt, _evolve_opts(cfg))
    trace.write_csv(d / "trace.csv")
    report = dyn.detect_blowup(trace, dyn.BlowupThresholds(growth_factor=dy.blowup_factor))
    _write_table(d / "growth_curve.csv", ["t", "grad_norm_sq"], report.growth_curve)
    res.flag("blowup_detected", report.detected)
    res.data.update(
        status=trace.status.value,
        t_star=report.t_star,
        virial_fit=list(report.virial_fit),
        fit_window=list(report.fit_window),
        virial_root=report.virial_root,
        resolution_loss_t=trace.resolution_loss_t,
        boundary_t=trace.boundary_t,
    )
    return trace, report


def cmd_blowup_critical(cfg: RunConfig, out: Optional[Path] = None) -> ScenarioResult:
    d = _scenario_dir(cfg, out)
    res = ScenarioResult(cfg.scenario, out_dir=d)
    p = cfg.params
    phi = ground_state(cfg).profile
    u0 = phi * (1 + cfg.epsilon)
    E0 = fn.energy(u0, p)
    res.data["E0"] = E0
    res.add("initial_energy_negative", E0, 0.0, strict=True)
    if not E0 < 0:
        log.error("E(u0) = %.3e is not negative; not evolving", E0)
        _write_json(d / "blowup_report.json", res.data)
        return res
    trace, report = _blowup_common(res, cfg, d, u0)
    curvature = report.curvature
    res.data.update(curvature=curvature, sixteen_E0=16 * E0)
    res.add("virial_curvature_vs_16E", abs(curvature / (16 * E0) - 1), 0.05)
    _write_json(d / "blowup_report.json", {"params": p.to_dict(), **res.data})
    return res


def cmd_blowup_supercritical(cfg: RunConfig, out: Optional[Path] = None) -> ScenarioResult:
    d = _scenario_dir(cfg, out)
    res = ScenarioResult(cfg.scenario, out_dir=d)
    p = cfg.params
    gsr = ground_state(cfg)
    m = gsr.level_m
    u0 = rescale(gsr.profile, cfg.scaling_lambda)
    rec = fn.diagnostics(u0, p)
    res.data.update(level_m=m, lam=cfg.scaling_lambda, J0=rec.J, Q0=rec.Q, S0=rec.action)
    res.add("J0_negative", rec.J, 0.0, strict=True)
    res.add("Q0_negative", rec.Q, 0.0, strict=True)
    res.add("S0_below_m", rec.action - m, 0.0, strict=True)
    if not (rec.J < 0 and rec.Q < 0 and rec.action < m):
        log.error("rescaled ground state is outside the invariant set; not evolving")
        _write_json(d / "blowup_report.json", res.data)
        return res
    trace, report = _blowup_common(res, cfg, d, u0)
    t = trace.t
    J, Q, S = trace.column("J"), trace.column("Q"), trace.column("action")
    inside = (J < 0) & (Q < 0) & (S < m)
    _write_table(
        d / "invariant_set.csv",
        ["t", "J", "Q", "S", "S_minus_m", "inside"],
        zip(t, J, Q, S, S - m, inside.astype(int)),
    )
    eps = -float(np.max(Q))
    res.data.update(epsilon=eps, persisted=bool(np.all(inside)))
    res.flag("invariant_set_persists", bool(np.all(inside)))
    res.add("Q_bounded_away_from_zero", -eps, 0.0, strict=True)
    _write_json(d / "blowup_report.json", {"params": p.to_dict(), **res.data})
    return res


def negative_energy_datum(grid: Grid, params: Params, center: float = 3.0, width: float = 1.0, growth: float = 1.05) -> tuple[Field, float]:
    """A cut Gaussian bump amplified geometrically until its energy is negative."""
    x = grid.nodes
    bump = np.exp(-((x - center) ** 2) / (2 * width**2)) * (1 - np.exp(-x))
    alpha = 1.0
    for _ in range(400):
        u = Field(grid, alpha * bump)
        if fn.energy(u, params) < 0:
            return u, alpha
        alpha *= growth
    raise RuntimeError("could not reach negative energy")


def cmd_negative_energy(cfg: RunConfig, out: Optional[Path] = None) -> ScenarioResult:
    """Negative-energy data and the quadratic virial bound.

    The bound ``||xu||^2 <= 8 E t^2 + flux(0) t + moment(0)`` follows from
    ``8 Q <= 16 E``, which holds for p >= 5 only; for p < 5 the check is
    run anyway and fails, as it should.
    """
    d = _scenario_dir(cfg, out)
    res = ScenarioResult(cfg.scenario, out_dir=d)
    p = cfg.params
    grid = cfg.grid.build()
    u0, alpha = negative_energy_datum(grid, p, cfg.initial.center, cfg.initial.width)
    rec0 = fn.diagnostics(u0, p)
    E0 = rec0.energy
    res.data.update(alpha=alpha, E0=E0, flux0=rec0.virial_flux, moment0=rec0.virial_moment)
    res.add("initial_energy_negative", E0, 0.0, strict=True)
    trace, report = _blowup_common(res, cfg, d, u0)
    t = trace.t
    M = trace.column("virial_moment")
    bound = 8 * E0 * t**2 + rec0.virial_flux * t + rec0.virial_moment
    horizon = trace.resolution_loss_t if trace.resolution_loss_t is not None else t[-1]
    window = t <= horizon
    excess = float(np.max((M - bound)[window])) / rec0.virial_moment
    _write_table(d / "virial_bound.csv", ["t", "virial_moment", "quadratic_bound"], zip(t, M, bound))
    res.data.update(bound_horizon=horizon, bound_excess=excess)
    # at p = 5 the bound is an identity; the slack absorbs the O(h^2) consistency error
    res.add("virial_bound_excess", excess, 1e-5)
    _write_json(d / "blowup_report.json", {"params": p.to_dict(), **res.data})
    return res


def cmd_compare_infinity(cfg: RunConfig, out: Optional[Path] = None) -> ScenarioResult:
    d = _scenario_dir(cfg, out)
    res = ScenarioResult(cfg.scenario, out_dir=d)
    p = cfg.params
    grid = cfg.grid.build()
    rows = []

    gsr = ground_state(cfg)
    m_inf = sol.infinity_level(p.p, p.omega)
    res.add("m_below_m_inf", gsr.level_m - m_inf, 0.0, strict=True)
    rows.append(("m", p.c, "", gsr.level_m, m_inf, m_inf - gsr.level_m))
    levels = {}
    for c in cfg.c_values:
        levels[c] = gsr.level_m if c == p.c else ground_state(cfg, p.with_(c=c)).level_m
        if c != p.c:
            rows.append(("m", c, "", levels[c], m_inf, m_inf - levels[c]))
            res.add(f"m_below_m_inf_c={c!r}", levels[c] - m_inf, 0.0, strict=True)
    if levels:
        cs = sorted(levels)
        gaps = [m_inf - levels[c] for c in cs]
        res.data["gap_increasing_in_c"] = bool(all(a < b for a, b in zip(gaps, gaps[1:])))
        res.data["gaps"] = dict(zip(map(repr, cs), gaps))

    mu = cfg.mu if cfg.mu is not None else gsr.mu
    I_inf = sol.infinity_energy(p.p, mu)
    flow = gs.normalized_gradient_flow(p, mu, opts=cfg.solver, grid=grid)
    res.flag("flow_converged", flow.converged)
    res.add("I_below_I_inf", flow.level_I - I_inf, 0.0, strict=True)
    rows.append(("I", p.c, "", flow.level_I, I_inf, I_inf - flow.level_I))

    for A in cfg.separations:
        psi = sol.two_bump(grid, sol.TwoBumpSpec(p.p, p.omega, A, mu=mu))
        E = fn.energy(psi, p)
        stated = I_inf - 2 * p.c * mu / A**2
        jensen = I_inf - p.c * mu / (2 * A**2)
        res.add(f"E_psi_below_I_inf_A={A!r}", E - I_inf, 0.0, strict=True)
        res.add(f"E_psi_jensen_bound_A={A!r}", E - jensen, 0.0)
        res.data[f"stated_bound_holds_A={A!r}"] = bool(E <= stated)
        rows.append(("E_psi", p.c, A, E, I_inf, I_inf - E))

    app = sol.appendix_checks(p.p, p.omega, cfg.appendix_separations)
    for key in ("grad_sq", "mass", "lp1", "hardy_term"):
        res.flag(f"appendix_{key}", app[key]["passed"])
        res.data[f"appendix_{key}"] = app[key]
    if p.p == 3 and p.omega == 1.0:
        A = 5.0
        ov = sol.overlap_integral(3.0, 1.0, A)
        exact = 8 * A / math.sinh(2 * A)
        res.add("overlap_closed_form", abs(ov / exact - 1), 1e-6)

    _write_table(d / "comparison.csv", ["quantity", "c", "A", "value", "reference", "gap"], rows)
    _write_json(d / "summary.json", {"params": p.to_dict(), "mu": mu, **res.data})
    return res


def random_smooth_fields(grid: Grid, count: int, seed: int) -> list[Field]:
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        v = smooth_bumps(grid, rng, 3)
        out.append(Field(grid, v / math.sqrt(fn.mass(Field(grid, v)))))
    return out


def identity_battery(fields_: list[Field], params: Params, rng: np.random.Generator) -> dict:
    """Exact algebraic identities on arbitrary fields, each as a max relative
    deviation over the battery."""
    out = {"Q_minus_2E_p5": 0.0, "J_vs_r1": 0.0, "S_split": 0.0, "ray_invariance": 0.0, "lambda_derivative": 0.0}
    p5 = params.with_(p=5.0)
    for u in fields_:
        P = fn.parts(u, p5)
        scale = abs(P.hardy(p5.c)) + P.lp1
        out["Q_minus_2E_p5"] = max(out["Q_minus_2E_p5"], abs(fn.q_value(u, p5) - 2 * fn.energy(u, p5)) / scale)
        J = fn.nehari_value(u, params)
        r1 = fn.pohozaev_residuals(u, params)[0]
        out["J_vs_r1"] = max(out["J_vs_r1"], abs(J - r1) / max(abs(J), 1e-300))
        S = fn.action(u, params)
        split = fn.energy(u, params) + 0.5 * params.omega * fn.mass(u)
        out["S_split"] = max(out["S_split"], abs(S - split) / abs(S))
        alpha = float(rng.uniform(0.2, 5.0))
        a = gs.nehari_project(u * alpha, params)
        b = gs.nehari_project(u, params)
        out["ray_invariance"] = max(out["ray_invariance"], fn.h1_norm(a - b) / fn.h1_norm(b))
        # d/dlam S(u_lam) at lam = 1 equals Q(u); u_lam by spline interpolation
        eps = 1e-3
        fd = (fn.action(rescale(u, 1 + eps), params) - fn.action(rescale(u, 1 - eps), params)) / (2 * eps)
        Q = fn.q_value(u, params)
        out["lambda_derivative"] = max(out["lambda_derivative"], abs(fd - Q) / max(abs(Q), fn.hardy(u, params)))
    return out


def cmd_verify_identities(cfg: RunConfig, out: Optional[Path] = None) -> ScenarioResult:
    d = _scenario_dir(cfg, out)
    res = ScenarioResult(cfg.scenario, out_dir=d)
    p = cfg.params
    grid = cfg.grid.build()
    gsr = ground_state(cfg)
    rep = gsr.identity_report
    res.flag("nehari_converged", gsr.converged)
    for k in gs.IDENTITY_KEYS:
        res.add(k, rep[k], cfg.tol)
    phi = gsr.profile
    # stationary solutions sit at the peak of the scaling curve: dS/dlam = Q = 0
    res.add("ground_state_Q", abs(fn.q_value(phi, p)) / fn.hardy(phi, p), cfg.tol)
    if p.p > 5:
        lam = gs.lambda_star(phi, p)
        res.add("ground_state_lambda_star", abs(lam - 1), cfg.tol)
        d_est = gs.scaling_action(phi, p, lam)
        res.add("m_equals_d", abs(d_est - gsr.level_m) / gsr.level_m, cfg.tol)

    rng = np.random.default_rng(cfg.seed)
    battery = random_smooth_fields(grid, cfg.random_fields, int(rng.integers(2**63)))
    ids = identity_battery(battery, p, rng)
    roundoff = 1e-10
    for k in ("Q_minus_2E_p5", "J_vs_r1", "S_split", "ray_invariance"):
        res.add(k, ids[k], roundoff)
    res.add("lambda_derivative", ids["lambda_derivative"], 1e-4)
    if p.p > 5:
        above = min(gs.scaling_action(u, p, gs.lambda_star(u, p)) for u in battery) - gsr.level_m
        res.add("d_lower_bound_random", -above, cfg.tol * gsr.level_m)

    res.write_checks(d / "matrix.csv")
    _write_json(d / "identities.json", {"params": p.to_dict(), "ground_state": rep, "battery": ids})
    return res


RUNNERS = {
    Scenario.GROUND_STATE: cmd_groundstate,
    Scenario.EVOLVE: cmd_evolve,
    Scenario.STABILITY: cmd_stability,
    Scenario.BLOWUP_CRITICAL: cmd_blowup_critical,
    Scenario.BLOWUP_SUPERCRITICAL: cmd_blowup_supercritical,
    Scenario.NEGATIVE_ENERGY_BLOWUP: cmd_negative_energy,
    Scenario.COMPARE_INFINITY: cmd_compare_infinity,
    Scenario.VERIFY_IDENTITIES: cmd_verify_identities,
}


def run(cfg: RunConfig, out: Optional[Path] = None) -> ScenarioResult:
    res = RUNNERS[cfg.scenario](cfg, out)
    if res.out_dir is not None:
        res.write_checks(res.out_dir / "checks.csv")
        (res.out_dir / "config.json").write_text(cfg.to_json())
    return res
