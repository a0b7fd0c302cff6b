import numpy as np
import pytest

from kppstab.green_lambda import (
    classify_regime,
    green_lambda,
    green_lambda_dx,
    green_residual,
    resolvent_oracle,
    verify_large_lambda_bound,
    verify_small_lambda_bounds,
)


def test_pure_heat_closed_form(heat):
    x = np.linspace(-6, 6, 25)
    y = np.array([-2.0, 0.0, 3.0])
    for lam in (0.05, 0.3 + 0.4j, -0.5 + 2j):
        s = np.sqrt(lam)
        G = green_lambda(lam, x, y, heat)
        ref = np.exp(-s * np.abs(x[:, None] - y[None, :])) / (2 * s)
        assert np.max(np.abs(G - ref) / np.abs(ref)) < 1e-8


def test_continuity_at_diagonal(ctx):
    lam = 0.1 + 0.2j
    for y in (-3.0, 0.0, 2.0):
        right = green_lambda(lam, y, y, ctx)
        eps = 1e-9
        left = green_lambda(lam, y - eps, y, ctx)
        assert abs(right - left) < 1e-8 * abs(right)


def test_derivative_jump(ctx):
    lam = 0.2 + 0.1j
    for y in (-2.0, 0.5, 4.0):
        r = green_lambda_dx(lam, [y], y, ctx, side="right")[0, 0]
        l = green_lambda_dx(lam, [y], y, ctx, side="left")[0, 0]
        assert abs((r - l) + 1.0) < 1e-8


def test_residual(ctx, rng):
    for _ in range(10):
        lam = complex(rng.uniform(0.01, 0.5), rng.uniform(-0.5, 0.5))
        y = rng.uniform(-5, 5)
        assert green_residual(lam, y, ctx) < 1e-5


def test_matches_fd_resolvent(ctx):
    lam, y = 0.1 + 0.05j, 1.0
    x, g = resolvent_oracle(lam, y, ctx)
    sel = np.abs(x - y) < 8
    G = green_lambda(lam, x[sel], y, ctx)
    assert np.max(np.abs(G - g[sel])) / np.max(np.abs(G)) < 1e-6


def test_regime_labels():
    assert classify_regime(1.0, -1.0) == "i"
    assert classify_regime(-1.0, 1.0) == "ii"
    assert classify_regime(3.0, 1.0) == "iii"
    assert classify_regime(1.0, 3.0) == "iv"
    assert classify_regime(-1.0, -3.0) == "v"
    assert classify_regime(-3.0, -1.0) == "vi"


def test_small_bounds_finite(ctx):
    g = np.linspace(-8, 8, 17)
    rep = verify_small_lambda_bounds([0.05, 0.1j, 0.2 * np.exp(2.5j)], g, g, ctx)
    assert all(np.isfinite(v) and v > 0 for v in rep.values())


def test_small_bounds_no_blowup_at_branch_point(ctx):
    g = np.linspace(-6, 6, 13)
    caps = []
    for m in (0.04, 0.004, 0.0004, 0.00004):
        rep = verify_small_lambda_bounds([m * np.exp(1j * np.pi / 4)], g, g, ctx)
        caps.append(max(rep.values()))
    # ratios saturate: increments shrink geometrically
    inc = np.diff(caps)
    assert np.all(inc[1:] < 0.7 * inc[:-1])
    assert inc[-1] < 0.15 * caps[-1]


def test_small_bounds_reject_large(ctx):
    with pytest.raises(ValueError):
        verify_small_lambda_bounds([5.0], [0.0], [0.0], ctx)


def test_large_pure_heat(heat):
    for phase in (0.0, 1.0, -1.5):
        lam = 400.0 * np.exp(1j * phase)
        rep = verify_large_lambda_bound([lam], np.linspace(0.5, 5, 10), heat)
        assert rep["eta"] == pytest.approx(np.cos(phase / 2), abs=1e-8)
        assert rep["C"] == pytest.approx(0.5, abs=1e-8)


def test_lambda_25(ctx):
    x = np.linspace(-4, 4, 81)
    G = green_lambda(25.0, x, 0.0, ctx)
    assert np.max(np.abs(G)) * 5 < 5.0


def test_imaginary_axis_decay(ctx):
    d = np.linspace(0.5, 5, 10)
    G = np.abs(green_lambda(100j, d, 0.0, ctx))
    assert -np.polyfit(10 * d, np.log(G), 1)[0] > 0


def test_jump_random(ctx, rng):
    for _ in range(10):
        lam = complex(rng.uniform(0.01, 0.5), rng.uniform(-0.5, 0.5))
        y = round(rng.uniform(-5, 5), 2)
        r = green_lambda_dx(lam, [y], y, ctx, side="right")[0, 0]
        l = green_lambda_dx(lam, [y], y, ctx, side="left")[0, 0]
        assert abs((r - l) + 1.0) < 1e-8


def test_conjugate_symmetry(ctx):
    x = np.linspace(-5, 5, 11)
    lam = 0.15 + 0.2j
    assert np.allclose(green_lambda(np.conj(lam), x, 1.0, ctx), np.conj(green_lambda(lam, x, 1.0, ctx)), rtol=1e-12)
