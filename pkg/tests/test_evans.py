import numpy as np
import pytest

from kppstab.evans import (
    ResolutionError,
    aux_determinants,
    constancy_defect,
    evans_function,
    matched_scale,
    no_unstable_spectrum_scan,
    rectangle_contour,
    winding_number,
    wronskian,
)
from kppstab.front import fit_asymptotics


def test_J_on_right(ctx):
    J = aux_determinants(0.04, [2.0, 5.0], ctx)["J"]
    assert np.allclose(J, 0.4, rtol=1e-6)


def test_K_left_relation(ctx):
    lam = 0.05 + 0.03j
    c2b = ctx.model.cstar + 2 * ctx.model.beta
    ys = np.array([-1.0, -3.0, -8.0])
    K = aux_determinants(lam, np.append(ys, 0.0), ctx)["K"]
    assert np.allclose(K[:-1], np.exp(-c2b * ys) * K[-1], rtol=1e-6)


def test_H_growth_bounded(ctx):
    lam = 0.05 + 0.03j
    c2b = ctx.model.cstar + 2 * ctx.model.beta
    x = np.linspace(-20, 0, 41)
    H = aux_determinants(lam, x, ctx)["H"]
    scaled = np.abs(H * np.exp(c2b * x))
    assert np.max(scaled) / np.min(scaled) < 10.0


@pytest.mark.parametrize("lam", [0.0, 0.04, 0.3 + 0.3j, -0.2 + 1j, 5 + 5j])
def test_wronskian_abel(ctx, lam):
    ys = [-10.0, -5.0, -1.0, 1.0, 5.0, 10.0]
    assert constancy_defect(lam, ys, ctx) < 1e-6


def test_W0_nonzero_and_limit(ctx):
    s = matched_scale(ctx)
    _, b, _ = fit_asymptotics(ctx.front, ctx.model)
    gb = ctx.model.gstar * b
    W = s * wronskian(0.0, [0.0, 20.0], ctx)
    assert abs(W[0]) > 1e-3
    assert abs(W[1] + gb) / gb < 5e-2


def test_winding_zero(ctx):
    c = rectangle_contour(0.05, 2.0, -1.0, 1.0, 40)
    assert no_unstable_spectrum_scan(c, ctx) == 0
    assert no_unstable_spectrum_scan(rectangle_contour(0.05, 2.0, -1.0, 1.0, 80), ctx) == 0


def test_winding_synthetic():
    c = rectangle_contour(0.05, 2.0, -1.0, 1.0, 40)
    assert no_unstable_spectrum_scan(c, fun=lambda z: z - 0.5) == 1
    assert no_unstable_spectrum_scan(c, fun=lambda z: (z - 0.5) * (z - 1 - 0.5j)) == 2
    assert no_unstable_spectrum_scan(c, fun=lambda z: z - 3.0) == 0


def test_winding_resolution():
    z = np.exp(2j * np.pi * np.arange(3) / 3)
    with pytest.raises(ResolutionError):
        winding_number(z)


def test_contour_touching_cut(ctx):
    with pytest.raises(ValueError):
        no_unstable_spectrum_scan(rectangle_contour(-1.0, 1.0, -1.0, 1.0, 10), ctx)


def test_evans_batch_matches_single(ctx):
    lams = np.array([0.1, 0.2 + 0.5j])
    batch = evans_function(lams, ctx)
    single = [wronskian(l, [0.0], ctx)[0] for l in lams]
    assert np.allclose(batch, single, rtol=1e-13)


def test_constancy_many_lambdas(ctx, rng):
    ys = [-10.0, -5.0, -1.0, 0.0, 1.0, 5.0, 10.0]
    r = np.sqrt(rng.uniform(0.0025, 1.0, 20))
    th = rng.uniform(-0.9 * np.pi, 0.9 * np.pi, 20)
    for lam in r * np.exp(1j * th):
        assert constancy_defect(lam, ys, ctx) < 1e-6


def test_inverse_wronskian_bounded(ctx):
    r = np.array([1e-4, 1e-2, 0.1, 0.5])
    th = np.linspace(-0.9 * np.pi, 0.9 * np.pi, 9)
    lams = (r[:, None] * np.exp(1j * th[None, :])).ravel()
    W = evans_function(lams, ctx)
    assert np.max(1 / np.abs(W)) < 10.0


def test_conjugate_symmetry(ctx):
    lams = np.array([0.1 + 0.3j, -0.2 + 0.05j, 2 + 5j])
    assert np.allclose(evans_function(lams.conj(), ctx), evans_function(lams, ctx).conj(), rtol=1e-12)
