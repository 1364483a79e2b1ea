import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hardy_nls import functionals as fn
from hardy_nls.functionals import CSV_COLUMNS, DiagnosticsRecord, Params, Regime
from hardy_nls.grid import Field, from_function, make_grid, rescale
from hardy_nls.soliton import soliton_field

HALF = make_grid("HalfLine", 20.0, 1024)


def random_field(grid, rng, smooth=True):
    x = grid.nodes
    if not smooth:
        return Field(grid, rng.normal(size=grid.size) + 1j * rng.normal(size=grid.size))
    v = np.zeros(grid.size, dtype=complex)
    for _ in range(3):
        x0 = rng.uniform(1, grid.L / 3)
        w = rng.uniform(0.5, 2)
        v += complex(rng.normal(), rng.normal()) * np.exp(-((x - x0) ** 2) / (2 * w * w))
    return Field(grid, v * (1 - np.exp(-x)) if grid.nodes[0] > 0 else v)


@pytest.fixture(scope="module")
def soliton_line():
    g = make_grid("FullLine", 40.0, 8192)
    return soliton_field(g, 3.0, 1.0), Params(3.0, 0.0, 1.0)


def test_params_validation_and_regime():
    assert Params(3, 0.1).regime is Regime.SUBCRITICAL
    assert Params(5, 0.1).regime is Regime.CRITICAL
    assert Params(7, 0.1).regime is Regime.SUPERCRITICAL
    for kw in ({"p": 1.0, "c": 0.1}, {"p": 3, "c": 0.25}, {"p": 3, "c": -0.1}, {"p": 3, "c": 0.1, "omega": 0.0}):
        with pytest.raises(ValueError):
            Params(**kw)


def test_zero_field_everything_vanishes():
    u = Field(HALF, np.zeros(HALF.size))
    pr = Params(3, 0.1)
    assert fn.mass(u) == fn.hardy(u, pr) == fn.energy(u, pr) == fn.action(u, pr) == 0.0
    assert fn.nehari_value(u, pr) == fn.q_value(u, pr) == 0.0
    assert fn.pohozaev_residuals(u, pr) == (0.0, 0.0)
    assert fn.virial_moment(u) == fn.virial_flux(u) == 0.0


def test_soliton_mass_and_energy(soliton_line):
    q, pr = soliton_line
    assert fn.mass(q) == pytest.approx(4.0, abs=1e-6)
    assert fn.energy(q, pr) == pytest.approx(-2 / 3, abs=1e-5)
    assert fn.action(q, pr) == pytest.approx(4 / 3, abs=1e-5)


def test_soliton_nehari_and_pohozaev():
    # the gradient stencil is second order: at h = 2L/N the bias is h^2/12 int q''^2
    g = make_grid("FullLine", 40.0, 16384)
    q = soliton_field(g, 3.0, 1.0)
    pr = Params(3.0, 0.0, 1.0)
    r1, r2 = fn.pohozaev_residuals(q, pr)
    assert abs(fn.nehari_value(q, pr)) <= 1e-5
    assert abs(r1) <= 1e-5 and abs(r2) <= 1e-5


def test_hardy_examples():
    g = make_grid("HalfLine", 30.0, 4096)
    u = from_function(g, lambda x: x * np.exp(-((x - 2) ** 2)))
    plain = fn.grad_norm_sq(u)
    assert fn.hardy(u, Params(3, 0.0)) == plain
    val = fn.hardy(u, Params(3, 0.2))
    assert val > 0
    assert val == pytest.approx(plain - 0.2 * fn.hardy_term(u), rel=1e-14)


def test_potential_needs_half_line():
    g = make_grid("FullLine", 10.0, 64)
    u = Field(g, np.ones(g.size))
    with pytest.raises(ValueError):
        fn.energy(u, Params(3, 0.1))
    with pytest.raises(ValueError):
        fn.virial_moment(u)


def test_action_nehari_identity():
    rng = np.random.default_rng(3)
    pr = Params(3.5, 0.15, 1.7)
    for _ in range(5):
        u = random_field(HALF, rng)
        lhs = fn.action(u, pr) - fn.nehari_value(u, pr) / (pr.p + 1)
        rhs = pr.pohozaev_coef * (fn.hardy(u, pr) + pr.omega * fn.mass(u))
        assert lhs == pytest.approx(rhs, rel=1e-13)


def test_nehari_sign_along_rays():
    rng = np.random.default_rng(4)
    pr = Params(3, 0.1)
    u = random_field(HALF, rng)
    assert fn.nehari_value(u * 1e-3, pr) > 0
    assert fn.nehari_value(u * 1e3, pr) < 0


def test_q_equals_twice_energy_at_p5():
    rng = np.random.default_rng(5)
    pr = Params(5, 0.2)
    for _ in range(10):
        u = random_field(HALF, rng, smooth=False)
        Q, E = fn.q_value(u, pr), fn.energy(u, pr)
        assert abs(Q - 2 * E) <= 1e-12 * (abs(fn.hardy(u, pr)) + fn.lp1(u, 5))


def test_r1_is_nehari_value():
    rng = np.random.default_rng(6)
    pr = Params(2.5, 0.1, 0.7)
    u = random_field(HALF, rng, smooth=False)
    assert fn.pohozaev_residuals(u, pr)[0] == fn.nehari_value(u, pr)
    assert fn.action(u, pr) == pytest.approx(fn.energy(u, pr) + 0.5 * pr.omega * fn.mass(u), rel=1e-14)


@settings(max_examples=30, deadline=None)
@given(theta=st.floats(-10, 10), seed=st.integers(0, 2**32 - 1))
def test_phase_invariance(theta, seed):
    rng = np.random.default_rng(seed)
    pr = Params(3, 0.1, 1.3)
    u = random_field(HALF, rng, smooth=False)
    v = u * np.exp(1j * theta)
    for f in (fn.hardy, fn.energy, fn.action, fn.nehari_value, fn.q_value):
        a, b = f(u, pr), f(v, pr)
        assert a == pytest.approx(b, rel=1e-12, abs=1e-12)
    assert fn.mass(v) == pytest.approx(fn.mass(u), rel=1e-13)
    assert fn.lp1(v, 3) == pytest.approx(fn.lp1(u, 3), rel=1e-13)


def test_virial_flux_examples():
    g = make_grid("HalfLine", 30.0, 8192)
    gx = np.exp(-((g.nodes - 6) ** 2)) * g.nodes
    assert fn.virial_flux(Field(g, gx)) == 0.0
    kappa = 0.7
    flux = fn.virial_flux(Field(g, gx * np.exp(1j * kappa * g.nodes)))
    expected = 4 * kappa * g.h * np.sum(g.nodes * gx**2)
    assert flux == pytest.approx(expected, rel=1e-4)
    assert fn.virial_moment(Field(g, gx)) >= 0


def test_scaling_laws():
    g = make_grid("HalfLine", 30.0, 8192)
    u = from_function(g, lambda x: np.exp(-((x - 5) ** 2) / 2) * (1 - np.exp(-(x**2))))
    pr = Params(3, 0.1)
    for lam in (0.7, 1.5):
        v = rescale(u, lam)
        assert fn.mass(v) == pytest.approx(fn.mass(u), rel=1e-3)
        assert fn.grad_norm_sq(v) == pytest.approx(lam**2 * fn.grad_norm_sq(u), rel=1e-3)
        assert fn.hardy_term(v) == pytest.approx(lam**2 * fn.hardy_term(u), rel=1e-3)
        assert fn.lp1(v, pr.p) == pytest.approx(lam ** ((pr.p - 1) / 2) * fn.lp1(u, pr.p), rel=1e-3)


def test_orbital_distance_examples():
    g = make_grid("HalfLine", 20.0, 1024)
    phi = from_function(g, lambda x: x * np.exp(-((x - 4) ** 2)))
    od = fn.orbital_distance(phi * np.exp(1j * math.pi / 3), phi)
    assert od.theta == pytest.approx(math.pi / 3, abs=1e-12) and od.dist <= 1e-12
    od = fn.orbital_distance(phi, phi)
    assert od.theta == 0.0 and od.dist <= 1e-14

    rng = np.random.default_rng(2)
    psi = random_field(g, rng)
    ip = fn.h1_inner(psi, phi)
    psi = psi - phi * (ip / fn.h1_inner(phi, phi))  # H^1-orthogonal to phi
    eps = 1e-3
    od = fn.orbital_distance(phi + psi * eps, phi)
    assert od.dist == pytest.approx(eps * fn.h1_norm(psi), abs=1e-8)


def test_orbital_distance_is_minimal():
    rng = np.random.default_rng(9)
    u, phi = random_field(HALF, rng), random_field(HALF, rng)
    od = fn.orbital_distance(u, phi)
    for th in np.linspace(0, 2 * np.pi, 64, endpoint=False):
        assert od.dist <= fn.h1_norm(u - phi * np.exp(1j * th)) + 1e-12


def test_orbital_distance_degenerate():
    g = make_grid("HalfLine", 10.0, 64)
    a = np.zeros(g.size)
    b = np.zeros(g.size)
    a[5], b[40] = 1.0, 1.0
    od = fn.orbital_distance(Field(g, a), Field(g, b))
    assert od.degenerate and od.theta == 0.0
    assert od.dist == pytest.approx(math.sqrt(fn.h1_norm(Field(g, a)) ** 2 + fn.h1_norm(Field(g, b)) ** 2))


def test_diagnostics_row_round_trip():
    rng = np.random.default_rng(1)
    pr = Params(3, 0.1)
    u = random_field(HALF, rng)
    rec = fn.diagnostics(u, pr, t=0.25, reference=u * 1j)
    row = rec.to_row()
    assert len(row) == len(CSV_COLUMNS)
    assert DiagnosticsRecord.from_row(row) == rec
    plain = fn.diagnostics(u, pr)
    assert plain.to_row()[-2:] == ["", ""]
    assert DiagnosticsRecord.from_row(plain.to_row()) == plain
    assert min(rec.mass, rec.lp1, rec.virial_moment, rec.grad_norm_sq) >= 0
