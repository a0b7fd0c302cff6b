import numpy as np
import pytest

from kppstab.model import (
    BranchCutError,
    NONLINEARITIES,
    get_nonlinearity,
    gamma_minus_distance,
    make_model,
    make_weight,
    mu_pm,
    read_config,
    zeta0,
    zeta1,
)


def test_default_constants():
    m = make_model(1.0, -1.0, 0.2, 0.8)
    assert m.cstar == 2.0 and m.gstar == 1.0
    assert m.betaMax == pytest.approx(np.sqrt(2) - 1, abs=1e-12)


def test_cstar_scales_with_sqrt_f1():
    assert make_model(0.25, -1.0, 0.1, 0.3).cstar == pytest.approx(1.0)


@pytest.mark.parametrize("beta,alpha", [(0.5, 0.8), (0.0, 0.8), (0.2, 1.0), (0.2, 0.0)])
def test_rejects_parameters(beta, alpha):
    with pytest.raises(ValueError):
        make_model(1.0, -1.0, beta, alpha)


@pytest.mark.parametrize("name", sorted(NONLINEARITIES))
def test_nonlinearity_hypotheses(name):
    get_nonlinearity(name).check()


def test_unknown_nonlinearity():
    with pytest.raises(ValueError, match="unknown"):
        get_nonlinearity("nope")


def test_bridge_constraints(model):
    w = make_weight(model)
    b, g = model.beta, model.gstar
    P = np.polynomial.Polynomial(w.coef)
    checks = [
        (P(-1), -b), (P.deriv()(-1), b), (P.deriv(2)(-1), 0.0),
        (P(1), -g), (P.deriv()(1), -g), (P.deriv(2)(1), 0.0), (P(0), 0.0),
    ]
    for got, want in checks:
        assert abs(got - want) < 1e-12
    assert w.omega(0.0) == 1.0


def test_weight_c2_at_junctions(model):
    w = make_weight(model)
    for x0 in (-1.0, 1.0):
        for f in (w.logw, w.dlogw, w.d2logw):
            assert abs(f(x0 - 1e-9) - f(x0 + 1e-9)) < 1e-7


def test_zeta1_values(model):
    w = make_weight(model)
    assert zeta1(2.0, w, model) == pytest.approx(0.0, abs=1e-14)
    assert zeta1(-3.0, w, model) == pytest.approx(2.4)
    P = np.polynomial.Polynomial(w.coef).deriv()
    assert zeta1(0.3, w, model) == pytest.approx(2.0 + 2 * P(0.3), abs=1e-14)
    x = np.linspace(-1.5, 1.5, 3001)
    assert np.max(np.abs(np.diff(zeta1(x, w, model)))) < 1e-2


def test_zeta0_limits(ctx):
    m = ctx.model
    z_left = zeta0(-40.0, ctx.front, ctx.weight, m, ctx.nl)
    assert z_left == pytest.approx(-0.56, abs=1e-6)
    assert abs(zeta0(55.0, ctx.front, ctx.weight, m, ctx.nl)) < 1e-20


def test_zeta0_envelope(ctx):
    """On [5, 30] the potential is bounded by C e^{-alpha x} with a finite fitted C."""
    x = np.linspace(5, 30, 251)
    z = np.abs(zeta0(x, ctx.front, ctx.weight, ctx.model, ctx.nl))
    C = np.max(z * np.exp(ctx.model.alpha * x))
    assert np.isfinite(C) and C < 10.0
    # and the true rate is faster than alpha
    assert z[-1] * np.exp(ctx.model.alpha * x[-1]) < z[0] * np.exp(ctx.model.alpha * x[0])


def test_mu_at_zero(model):
    assert mu_pm(0.0, model, +1).real == pytest.approx(0.214214, abs=1e-6)
    assert mu_pm(0.0, model, -1).real == pytest.approx(-2.614214, abs=1e-6)


def test_mu_sum_and_product(model, rng):
    lam = rng.normal(size=20) + 1j * rng.normal(size=20)
    p, m_ = mu_pm(lam, model, 1), mu_pm(lam, model, -1)
    assert np.allclose(p + m_, -(model.cstar + 2 * model.beta), atol=1e-13)
    assert np.allclose(p * m_, model.z0_left - lam, atol=1e-12)


def test_mu_branch_cut(model):
    with pytest.raises(BranchCutError):
        mu_pm(-2.0, model, 1)


def test_mu_plus_positive_for_all_beta():
    bmax = np.sqrt(2) - 1
    for beta in np.linspace(1e-3, bmax - 1e-3, 50):
        m = make_model(1.0, -1.0, beta, 0.5)
        assert mu_pm(0.0, m, 1).real > 0


def test_gamma_minus_distance(model):
    assert gamma_minus_distance(0.0, model) > 0
    assert gamma_minus_distance(model.z0_left, model) == pytest.approx(0.0, abs=1e-14)
    assert gamma_minus_distance(-1.56 + 2.4j, model) == pytest.approx(0.0, abs=1e-12)


def test_config_roundtrip(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("# comment\nnonlinearity = cubic\nbeta = 0.1  # inline\n\ngrid_step = 0.02\n")
    assert read_config(p) == {"nonlinearity": "cubic", "beta": 0.1, "grid_step": 0.02}


def test_config_unknown_key(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("gamma = 3\n")
    with pytest.raises(KeyError, match="gamma"):
        read_config(p)


def test_zeta1_constant_outside_bridge(model):
    w = make_weight(model)
    assert np.ptp(zeta1(np.linspace(-30, -1, 50), w, model)) < 1e-14
    assert np.ptp(zeta1(np.linspace(1, 30, 50), w, model)) < 1e-14


def test_small_working_set_right_of_gamma_minus(model):
    from kppstab.acceptance import small_region_samples

    lams = np.array([lam for lam, _ in small_region_samples(200, seed=3)])
    assert np.all(gamma_minus_distance(lams, model) > 0)
