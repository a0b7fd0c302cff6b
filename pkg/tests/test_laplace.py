import numpy as np
import pytest

from kppstab.laplace import (
    ContourError,
    ContourParams,
    build_contour,
    convolve_green,
    decay_slope,
    green_time,
    green_time_matrix,
    heat_kernel,
    profile_kappa,
    sup_near_diagonal,
    verify_time_bounds,
)


def test_contour_closed_form():
    p = ContourParams(L=4, theta=5 * np.pi / 6, delta0=0.05)
    c = build_contour(4.0, 2.0, 0.0, p)
    assert c.regime == "bulk"
    assert c.rho == pytest.approx(0.125)
    ref = 0.125 * np.sqrt(3) + np.sqrt(0.125**2 * 4 + 0.05)
    assert c.kstar == pytest.approx(ref, abs=1e-12)
    assert c.kstar == pytest.approx(0.551917, abs=1e-6)


def test_degenerate_distance():
    p = ContourParams()
    c = build_contour(10.0, 1.5, 1.5, p)
    assert c.rho == p.rho_min
    assert [s.kind for s in c.segments] == ["parabola", "ray"]


@pytest.mark.parametrize("t,d", [(4.0, 2.0), (0.5, 1.0), (10.0, 100.0), (50.0, 0.0)])
def test_segments_join(t, d):
    c = build_contour(t, d, 0.0)
    assert c.mismatch() < 1e-12


def test_fast_regime_selection():
    assert build_contour(0.5, 0.0, 0.0).regime == "fast"
    assert build_contour(2.0, 20.0, 0.0).regime == "fast"
    assert build_contour(2.0, 1.0, 0.0).regime == "bulk"


def test_bad_parameters():
    with pytest.raises(ValueError):
        build_contour(0.0, 1.0, 0.0)
    with pytest.raises(ContourError):
        build_contour(1.0, 0.0, 0.0, ContourParams(theta=0.3))
    with pytest.raises(ContourError):
        build_contour(0.5, 1.0, 0.0, ContourParams(kappa=2.0))


def test_heat_at_origin(heat):
    g = green_time(1.0, 0.0, 0.0, heat)
    assert g.value == pytest.approx(1 / np.sqrt(4 * np.pi), abs=1e-6)
    assert abs(g.imag) < 1e-10


def test_heat_closed_form_grid(heat):
    xs = np.linspace(-5, 5, 11)
    ys = np.array([-1.0, 0.0, 2.0])
    for t in (0.3, 1.0, 7.0, 40.0):
        G = green_time_matrix(t, xs, ys, heat)
        ref = heat_kernel(t, xs[:, None], ys[None, :])
        sel = ref > 1e-8
        assert np.max(np.abs(G[sel] - ref[sel]) / ref[sel]) < 1e-6


def test_quadrature_refinement(ctx):
    green_time(5.0, 3.0, -2.0, ctx, check=True, rtol=1e-6)


def test_heat_slope(heat):
    slope, _, _ = decay_slope(heat, ts=[10, 20, 40, 80, 160])
    assert slope == pytest.approx(-0.5, abs=0.05)


@pytest.mark.slow
def test_late_local_slope(ctx):
    """Past the pre-asymptotic window the diagonal sup decays like t^{-3/2}."""
    ts = np.array([1000.0, 3000.0])
    s = [sup_near_diagonal(t, ctx) for t in ts]
    slope = np.log(s[1] / s[0]) / np.log(ts[1] / ts[0])
    assert slope == pytest.approx(-1.5, abs=0.05)


def test_profile_kappa(ctx):
    # in the right half-line the kernel is heat-like
    assert 0 < profile_kappa(50.0, 20.0, ctx) < 8


def test_profile_asymmetric_at_interface(ctx):
    with pytest.raises(ArithmeticError):
        profile_kappa(50.0, 0.0, ctx)


def test_time_bounds_finite(ctx):
    g = np.linspace(-6, 6, 7)
    rep = verify_time_bounds([0.5, 10.0], g, g, ctx)
    assert 0 < rep["C_fast"] < np.inf and 0 < rep["C_bulk"] < np.inf


def test_convolve_sifting(ctx):
    y0, sig = -2.0, 0.05
    y = np.arange(y0 - 1, y0 + 1 + 1e-9, 0.005)
    h = np.exp(-((y - y0) ** 2) / (2 * sig**2)) / np.sqrt(2 * np.pi * sig**2)
    xs = np.array([0.0, 3.0])
    conv = convolve_green(5.0, h, y, xs, ctx)
    direct = green_time_matrix(5.0, xs, [y0], ctx)[:, 0]
    # second moment correction of a Gaussian approximant is O(sig^2)
    assert np.max(np.abs(conv - direct)) / np.max(np.abs(direct)) < 5 * sig**2


def test_convolve_short_time(ctx):
    y = np.arange(-6, 6 + 1e-9, 0.05)
    h = np.exp(-y**2)
    xs = np.linspace(-8, 8, 33)
    r = convolve_green(1.0, h, y, xs, ctx)
    assert np.max(np.abs(r)) < 2.0 * np.max(h)


def test_convolve_zero(ctx):
    assert np.all(convolve_green(2.0, np.zeros(5), np.linspace(0, 1, 5), [0.0, 1.0], ctx) == 0)


@pytest.mark.slow
def test_convolve_weighted_decay(ctx):
    y = np.arange(-6, 6 + 1e-9, 0.05)
    h = np.exp(-y**2)
    xs = np.arange(-10.0, 40.5, 0.5)
    ts = np.array([10, 20, 40, 80, 160.0])
    sups = [np.max(np.abs(convolve_green(t, h, y, xs, ctx)) / (1 + np.abs(xs))) for t in ts]
    slope = np.polyfit(np.log(ts), np.log(sups), 1)[0]
    assert slope == pytest.approx(-1.5, abs=0.15)


def test_imaginary_part_cancels(ctx):
    for t, x, y in [(5.0, 3.0, -2.0), (0.5, 1.0, 0.0), (50.0, 10.0, 2.0)]:
        g = green_time(t, x, y, ctx)
        assert abs(g.imag) < 1e-8 * (abs(g.value) + 1e-300)


def test_parabola_even_odd(ctx):
    """With the 1/(2 pi i) factor the parabola integrand has even real and odd imaginary part in k."""
    from kppstab.green_lambda import green_lambda

    t, x, y, rho = 5.0, 3.0, -2.0, 0.3
    k = np.array([0.05, 0.2, 0.7])
    vals = []
    for kk in (k, -k):
        sq = rho + 1j * kk
        lam = sq**2
        G = np.array([green_lambda(l, x, y, ctx) for l in lam])
        vals.append(np.exp(lam * t) * G * 2j * sq / (2j * np.pi))
    plus, minus = vals
    assert np.allclose(plus.real, minus.real, rtol=1e-10)
    assert np.allclose(plus.imag, -minus.imag, rtol=1e-10)


def test_refinement_stable(ctx):
    p = ContourParams()
    for t, x, y in [(5.0, 3.0, -2.0), (20.0, 0.0, 0.0)]:
        a = green_time(t, x, y, ctx, params=p).value
        b = green_time(t, x, y, ctx, params=p.with_(refine=2)).value
        assert abs(a - b) < 1e-7 * abs(a)


def test_contour_deformation(ctx):
    base = ContourParams(L=4, theta=5 * np.pi / 6)
    for t, x, y in [(5.0, 3.0, -2.0), (20.0, 5.0, 0.0)]:
        ref = green_time(t, x, y, ctx, params=base).value
        for p in (base.with_(L=6), base.with_(theta=3 * np.pi / 4)):
            assert abs(green_time(t, x, y, ctx, params=p).value - ref) < 1e-6 * abs(ref)
