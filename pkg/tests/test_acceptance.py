"""Acceptance criteria at production resolution (L = 40, N = 8192).

Each test records its checks through the ``criterion`` fixture, which prints
one pass/fail line per criterion and repeats them in the terminal summary.
"""

import math
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from hardy_nls import dynamics as dyn
from hardy_nls import experiments as ex
from hardy_nls import functionals as fn
from hardy_nls import groundstate as gs
from hardy_nls import soliton as sol
from hardy_nls.functionals import Params
from hardy_nls.grid import Field, make_grid

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
HALF = make_grid("HalfLine", 40.0, 8192)


def scenario(name, out, **overrides):
    cfg = ex.RunConfig.load(CONFIGS / f"{name}.json")
    if overrides:
        cfg = replace(cfg, **overrides)
    return ex.run(cfg, out)


def copy_checks(log, res, names=None):
    for c in res.checks:
        if names is None or c.name in names:
            log.check(c.name, c.value, c.bound, c.strict)


@pytest.fixture(scope="module")
def p3():
    return gs.minimize_nehari(Params(3, 0.1), grid=HALF)


@pytest.mark.criterion("01 reference level on the line")
def test_reference_level(criterion, tmp_path):
    res = scenario("groundstate_fullline", tmp_path)
    copy_checks(criterion, res, {"nehari_converged", "level_vs_m_inf", "soliton_h1_distance"})
    assert criterion.passed


@pytest.mark.criterion("02 strict level gap")
def test_strict_level_gap(criterion):
    m_inf = sol.infinity_level(3, 1.0)
    gaps = []
    for c in (0.05, 0.1, 0.2):
        r = gs.minimize_nehari(Params(3, c), grid=HALF)
        criterion.check(f"converged_c={c}", 0 if r.converged else 1, 0)
        criterion.check(f"m-m_inf_c={c}", r.level_m - m_inf, 0.0, strict=True)
        gaps.append(m_inf - r.level_m)
    increasing = all(a < b for a, b in zip(gaps, gaps[1:]))
    criterion.note("gaps " + ", ".join(f"{g:.4g}" for g in gaps) + (" increasing in c" if increasing else " not monotone in c"))
    assert criterion.passed


@pytest.mark.criterion("03 ground-state identities")
def test_ground_state_identities(criterion, p3):
    for p, r in ((2, gs.minimize_nehari(Params(2, 0.1), grid=HALF)), (3, p3)):
        for k in gs.IDENTITY_KEYS:
            criterion.check(f"{k}_p={p}", r.identity_report[k], 1e-3)
    assert criterion.passed


@pytest.mark.criterion("04 solver equivalence")
def test_solver_equivalence(criterion, p3):
    flow = gs.normalized_gradient_flow(p3.params, p3.mu, grid=HALF)
    criterion.check("flow_converged", 0 if flow.converged else 1, 0)
    criterion.check("h1_distance", fn.orbital_distance(flow.profile, p3.profile).dist, 1e-3)
    assert criterion.passed


@pytest.mark.criterion("05 exponential decay")
def test_exponential_decay(criterion, p3):
    x = HALF.nodes
    w = (x >= HALF.L / 2) & (x <= 3 * HALF.L / 4)
    slope = np.polyfit(x[w], np.log(np.abs(p3.profile.values[w])), 1)[0]
    root = math.sqrt(p3.params.omega)
    criterion.check("slope_low", -1.1 * root - slope, 0.0)
    criterion.check("slope_high", slope + 0.9 * root, 0.0)
    criterion.note(f"slope {slope:.5f}")
    assert criterion.passed


@pytest.fixture(scope="module")
def standing_run(tmp_path_factory):
    return scenario("evolve", tmp_path_factory.mktemp("evolve"))


@pytest.mark.criterion("06 conservation")
def test_conservation(criterion, standing_run):
    copy_checks(criterion, standing_run, {"completed", "mass_drift", "energy_drift"})
    assert criterion.passed


@pytest.mark.criterion("07 standing-wave fidelity")
def test_standing_wave(criterion, standing_run):
    copy_checks(criterion, standing_run, {"max_orbital_distance", "max_modulus_deviation"})
    assert criterion.passed


@pytest.mark.criterion("08 orbital stability")
def test_orbital_stability(criterion, tmp_path):
    res = scenario("stability", tmp_path)
    copy_checks(criterion, res)
    criterion.note(f"initial {res.data['initial_distance']:.4g}, max {res.data['max_distance']:.4g}")
    assert criterion.passed


@pytest.mark.criterion("09 virial identity")
def test_virial_identity(criterion, tmp_path):
    res = scenario("virial", tmp_path)
    copy_checks(criterion, res)
    criterion.note(f"halving ratios {res.data['virial_second_ratio']:.3f}, {res.data['virial_first_ratio']:.3f}")
    assert criterion.passed


@pytest.mark.criterion("10 critical blow-up")
def test_critical_blowup(criterion, tmp_path):
    res = scenario("blowup_critical", tmp_path)
    copy_checks(criterion, res)
    assert {c.name for c in res.checks} >= {"initial_energy_negative", "blowup_detected", "virial_curvature_vs_16E"}
    assert criterion.passed


@pytest.mark.criterion("11 supercritical blow-up")
def test_supercritical_blowup(criterion, tmp_path):
    res = scenario("blowup_supercritical", tmp_path)
    copy_checks(criterion, res)
    assert "invariant_set_persists" in {c.name for c in res.checks}
    criterion.note(f"epsilon {res.data['epsilon']:.4g}")
    assert criterion.passed


@pytest.mark.criterion("12 negative-energy blow-up")
def test_negative_energy_blowup(criterion, tmp_path):
    res = scenario("negative_energy", tmp_path)
    copy_checks(criterion, res)
    assert criterion.passed


@pytest.mark.criterion("13 separation asymptotics")
def test_separation_asymptotics(criterion):
    out = sol.appendix_checks(3, 1.0, (3.0, 5.0, 8.0))
    for key in ("grad_sq", "mass", "lp1", "hardy_term"):
        criterion.check(key, 0 if out[key]["passed"] else 1, 0)
    ov = sol.overlap_integral(3, 1.0, 5.0)
    criterion.check("overlap_A=5", abs(ov * math.sinh(10) / 40 - 1), 1e-6)
    assert criterion.passed


@pytest.mark.criterion("14 exact discrete identities")
def test_exact_identities(criterion):
    fields_ = ex.random_smooth_fields(HALF, 10, seed=2024)
    for p in (3.0, 7.0):
        ids = ex.identity_battery(fields_, Params(p, 0.1, 1.3), np.random.default_rng(int(p)))
        for k in ("Q_minus_2E_p5", "J_vs_r1", "S_split", "ray_invariance"):
            criterion.check(f"{k}_p={p:g}", ids[k], 1e-10)
    assert criterion.passed


@pytest.mark.criterion("15 numerical-analysis properties")
def test_numerical_properties(criterion):
    pr = Params(3, 0.1)
    rng = np.random.default_rng(0)
    u = Field(HALF, rng.normal(size=HALF.size) + 1j * rng.normal(size=HALF.size))
    m0 = fn.mass(u)
    drift = max(abs(fn.mass(dyn.linear_half_step(u, dt, pr)) / m0 - 1) for dt in (1e-3, 1e-1))
    criterion.check("cn_unitarity", drift, 1e-12)

    x = HALF.nodes
    u0 = Field(HALF, 1.2 * np.exp(-((x - 6) ** 2) / 2) * np.exp(0.5j * x) * (1 - np.exp(-x)))
    finals = [dyn.evolve(u0, pr, 1.0, dt, dyn.EvolveOptions(cadence=10**6)).final for dt in (4e-3, 2e-3, 1e-3)]
    ratio = fn.h1_norm(finals[0] - finals[1]) / fn.h1_norm(finals[1] - finals[2])
    criterion.check("halving_ratio_low", 3.5 - ratio, 0.0)
    criterion.check("halving_ratio_high", ratio, 4.5)
    criterion.note(f"halving ratio {ratio:.4f}")

    g = make_grid("HalfLine", 20.0, 2048)
    v0 = Field(g, np.exp(-((g.nodes - 3) ** 2)) * (1 - np.exp(-g.nodes)))
    grad = gs.action_gradient(v0, pr)
    eps, worst = 1e-5, 0.0
    for _ in range(10):
        v = Field(g, np.convolve(rng.normal(size=g.size), np.ones(25) / 25, mode="same"))
        fd = (fn.action(v0 + v * eps, pr) - fn.action(v0 - v * eps, pr)) / (2 * eps)
        an = g.h * float(np.real(np.vdot(v.values, grad.values)))
        worst = max(worst, abs(an - fd) / abs(fd))
    criterion.check("action_gradient_fd", worst, 1e-5)
    assert criterion.passed
