import numpy as np
import pytest

from kppstab.front import (
    FrontSolveError,
    derivative_mode,
    fit_asymptotics,
    front_residual,
    solve_front,
)
from kppstab.model import get_nonlinearity, make_model, mu_pm


@pytest.fixture(scope="module")
def kpp_front(ctx):
    return ctx.front


def test_normalization_and_monotone(kpp_front):
    assert kpp_front.q_at(0.0) == pytest.approx(0.5, abs=1e-12)
    assert np.all(np.diff(kpp_front.q) < 0)
    assert np.all((kpp_front.q > 0) & (kpp_front.q < 1))


def test_residual(kpp_front, ctx):
    assert np.max(np.abs(front_residual(kpp_front, ctx.model, ctx.nl))) < 1e-8


def test_fit_synthetic():
    m = make_model(1.0, -1.0)
    x = np.linspace(0, 60, 3001)
    a, b, err = fit_asymptotics((x, (1 + 2 * x) * np.exp(-x)), m, window=(20, 45))
    assert a == pytest.approx(1.0, abs=1e-10)
    assert b == pytest.approx(2.0, abs=1e-10)
    assert err < 1e-10


def test_fit_window_guard():
    m = make_model(1.0, -1.0)
    x = np.linspace(0, 60, 301)
    with pytest.raises(ValueError):
        fit_asymptotics((x, np.exp(-x)), m, window=(5, 45))


def test_fit_front(kpp_front, ctx):
    a, b, err = fit_asymptotics(kpp_front, ctx.model)
    assert b > 0 and err < 1e-4
    _, b2, _ = fit_asymptotics(kpp_front, ctx.model, window=(25, 50))
    assert abs(b2 - b) / b < 0.01


def test_tail_ratio_converges(ctx):
    """q(X+) e^{g X+} / X+ approaches b as the right truncation grows."""
    m, nl = ctx.model, ctx.nl
    _, b, _ = fit_asymptotics(ctx.front, m)
    gaps = []
    for Xp in (40.0, 80.0, 160.0):
        p = solve_front(nl, m, X_plus=Xp)
        gaps.append(abs(p.q_at(Xp) * np.exp(m.gstar * Xp) / Xp - b))
    assert gaps[0] > gaps[1] > gaps[2]


def test_cubic_front():
    nl = get_nonlinearity("cubic")
    m = make_model(float(nl.f1(0.0)), float(nl.f1(1.0)), 0.2, 0.8)
    p = solve_front(nl, m)
    assert p.q_at(0.0) == pytest.approx(0.5, abs=1e-12)
    assert p.residual < 1e-8


def test_truncation_precondition(ctx):
    with pytest.raises((ValueError, FrontSolveError)):
        solve_front(ctx.nl, ctx.model, X_minus=-10.0)


def test_derivative_mode(kpp_front, ctx):
    m = ctx.model
    phi = derivative_mode(kpp_front, ctx.weight)
    _, b, _ = fit_asymptotics(kpp_front, m)
    # phi grows linearly on the right; its slope tends to -g* b
    slope = (phi(201.0) - phi(199.0)) / 2.0
    assert slope == pytest.approx(-m.gstar * b, rel=1e-6)
    x = np.linspace(-55, 55, 2001)
    assert np.all(phi(x) < 0)
    # left tail rate equals mu^+(0)
    xl = np.linspace(-45, -30, 31)
    rate = np.polyfit(xl, np.log(np.abs(phi(xl))), 1)[0]
    assert rate == pytest.approx(mu_pm(0.0, m, 1).real, rel=1e-3)


def test_refinement_order(ctx):
    m, nl = ctx.model, ctx.nl
    qs = [solve_front(nl, m, h=h) for h in (0.04, 0.02, 0.01)]
    x = np.linspace(-40, 40, 81)
    e1 = np.max(np.abs(qs[0].q_at(x) - qs[1].q_at(x)))
    e2 = np.max(np.abs(qs[1].q_at(x) - qs[2].q_at(x)))
    assert np.log2(e1 / e2) >= 1.9


def test_translation_identity():
    m = make_model(1.0, -1.0)
    x = np.linspace(0, 80, 4001)
    a, b, s = 1.5, 2.0, 3.0
    # q(x - s) = (a + b (x - s)) e^{-(x - s)}: tail variable picks up e^{s}
    q = (a + b * (x - s)) * np.exp(-(x - s))
    a2, b2, _ = fit_asymptotics((x, q * np.exp(-s)), m)
    assert a2 == pytest.approx(a - b * s, abs=1e-9)
    assert b2 == pytest.approx(b, abs=1e-9)


def test_initial_iterate_independent(ctx):
    p0 = solve_front(ctx.nl, ctx.model, init=0)
    p1 = solve_front(ctx.nl, ctx.model, init=1)
    assert np.max(np.abs(p0.q - p1.q)) < 1e-8


def test_right_truncation_is_free(ctx):
    """No boundary row at X+: the profile on a common window does not move."""
    p = solve_front(ctx.nl, ctx.model, X_plus=100.0)
    x = np.linspace(-50, 50, 101)
    assert np.max(np.abs(p.q_at(x) - ctx.front.q_at(x))) < 1e-14
