import numpy as np
import pytest
from scipy.integrate import quad

from kppstab.model import get_nonlinearity
from kppstab.modes import ModeContext
from kppstab.simulate import (
    BlowUpError,
    GuardBandError,
    Simulator,
    chi,
    convolution_inequality_check,
    evolve,
    omega_inf_closed_form,
    remainder_N,
    run_decay_experiment,
    run_full_u,
    step_linear,
)


@pytest.fixture(scope="module")
def sim(ctx):
    return Simulator(ctx)


@pytest.mark.parametrize("name", ["kpp", "cubic"])
def test_N_exact_forms(name):
    nl = get_nonlinearity(name)
    mu = np.linspace(0, 1, 7)[:, None]
    nu = np.array([-0.3, -1e-3, 1e-3, 0.2])[None, :]
    ref = (nl.f(mu + nu) - nl.f(mu) - nl.f1(mu) * nu) / nu
    assert np.allclose(remainder_N(mu, nu, nl), ref, atol=1e-12)


def test_N_kpp_is_minus_nu():
    nl = get_nonlinearity("kpp")
    nu = np.array([-0.5, 1e-12, 0.25])
    assert np.array_equal(remainder_N(0.3, nu, nl), -nu)


def test_N_small_nu_limit():
    from dataclasses import replace

    nl = replace(get_nonlinearity("cubic"), name="cubic-generic")
    mu = np.array([0.2, 0.7])
    for nu in (1e-6, 1e-9, 1e-12):
        got = remainder_N(mu, np.full(2, nu), nl) / nu
        assert np.allclose(got, nl.f2(mu) / 2, rtol=1e-4)


def test_zero_stays_zero(sim):
    s, _ = evolve(sim.state(np.zeros(sim.x.size)), 1.0)
    assert np.all(s.p == 0)


def _heat_run(h, dt):
    heat = ModeContext.pure_heat_model()
    sim = Simulator(heat, X=(-30.0, 30.0), h=h, dt=dt)
    s, _ = evolve(sim.state(lambda x: np.exp(-x**2)), 1.0, nonlinear=False)
    return sim.x, s.p


def test_heat_gaussian():
    x, coarse = _heat_run(0.02, 0.01)
    _, fine = _heat_run(0.01, 0.005)
    rich = (4 * fine[::2] - coarse) / 3
    exact = np.exp(-x**2 / 5) / np.sqrt(5)
    assert np.max(np.abs(rich - exact)) < 1e-6


def test_pure_heat_has_no_nonlinearity():
    sim = Simulator(ModeContext.pure_heat_model(), X=(-10.0, 10.0))
    with pytest.raises(ValueError):
        sim.nonlinear_term(np.zeros(sim.x.size))


def test_unknown_form(ctx):
    with pytest.raises(ValueError):
        Simulator(ctx, form="spectral")


def test_full_u_equivalence(ctx):
    sim = Simulator(ctx, form="conjugate")
    p0 = lambda x: 0.01 * np.exp(-x**2)
    s, _ = evolve(sim.state(p0), 2.0)
    p_u, u = run_full_u(sim, p0, 2.0)
    # (u - q*)/w amplifies rounding in u by 1/w; compare p where w >= 1e-4
    ok = sim.omega >= 1e-4
    assert np.max(np.abs(p_u - s.p)[ok]) / np.max(np.abs(s.p)) < 1e-6
    wp = sim.omega * s.p
    assert np.max(np.abs(sim.omega * p_u - wp)) / np.max(np.abs(wp)) < 1e-6


def test_comparison_principle(ctx):
    sim = Simulator(ctx)
    p0 = lambda x: 0.5 * np.exp(-x**2) / np.maximum(sim.ctx.weight.omega(x), 1e-300)
    _, u = run_full_u(sim, p0, 5.0)
    assert u.min() >= -1e-12 and u.max() <= 1 + 1e-12


def test_guard_band(sim):
    with pytest.raises(GuardBandError):
        sim.check_guard(np.full(sim.x.size, 5.0))
    with pytest.raises(GuardBandError):
        run_decay_experiment(lambda x: -2.0 * np.exp(-x**2), T_final=1.0, sim=sim)


def test_blow_up_detector(sim):
    s = sim.state(lambda x: np.exp(-x**2))
    with pytest.raises(BlowUpError):
        step_linear(s, dt=-1.0)


def test_convolution_plateau():
    rep = convolution_inequality_check((0.0, 1.0, 10.0, 100.0, 1000.0))
    v = rep["values"]
    assert v[0.0] == 0.0
    assert abs(v[1000.0] - v[100.0]) < 0.05 * v[100.0]
    assert np.isfinite(rep["sup"])
    ref, _ = quad(lambda s: (2 - s) ** -1.5 * (1 + s) ** -3, 0, 1, epsabs=1e-14)
    assert v[1.0] == pytest.approx(ref * 2**1.5, abs=1e-10)


def test_omega_inf(ctx):
    m = ctx.model
    closed = omega_inf_closed_form(m.beta, m.gstar, ctx.weight)
    assert closed == pytest.approx(5 * np.exp(-0.8), rel=1e-12)
    assert ctx.weight.sup_weighted() == pytest.approx(closed, rel=1e-6)


def test_chi_kpp():
    assert chi(0.3, get_nonlinearity("kpp")) == 1.0
    assert chi(0.5, get_nonlinearity("cubic")) == pytest.approx(4.5)


def test_short_decay_report(sim):
    rep = run_decay_experiment(lambda x: 0.01 * np.exp(-x**2), T_final=5.0, sim=sim, t_fit=1.0)
    assert rep.guard_ok and rep.chi_ratio <= 1 + 1e-12
    assert rep.boundary_max < 1e-12
    assert np.all(np.diff(rep.theta_series[:, 1]) >= 0)
    assert rep.theta_at(5.0) < 3 * rep.theta_at(1.0)


@pytest.mark.slow
def test_refinement_changes_slope_little(ctx):
    p0 = lambda x: 0.01 * np.exp(-x**2)
    a = run_decay_experiment(p0, T_final=40.0, ctx=ctx, h=0.02, dt=0.01)
    b = run_decay_experiment(p0, T_final=40.0, ctx=ctx, h=0.01, dt=0.005)
    assert abs(a.slope - b.slope) < 0.02
