"""Temporal Green's function by inverse Laplace transform along deformed contours.

    G(t, x, y) = 1/(2 pi i) int_Gamma e^{lam t} G_lam(x, y) dlam

The contour is a parabola ``sqrt(lam) = rho + i k`` near the branch point
joined to two rays ``lam = -delta0 + e^{+/- i theta} l``.  Because
``G_lam`` is real on the positive axis only the upper half is integrated and

    G = Im( int_{upper} e^{lam t} G_lam dlam ) / pi.

Quadrature is composite Gauss-Legendre with panel counts set from the phase
and decay of ``e^{lam t - sqrt(lam) |x - y|}`` along each piece.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .green_lambda import mode_table
from .modes import ModeContext

__all__ = [
    "ContourParams",
    "Segment",
    "ContourSpec",
    "build_contour",
    "shared_contour",
    "green_time",
    "green_time_matrix",
    "GreenTimeSample",
    "heat_kernel",
    "sup_near_diagonal",
    "decay_slope",
    "profile_kappa",
    "verify_time_bounds",
    "convolve_green",
    "QuadratureError",
    "ContourError",
]

TRUNC = 37.0  # e^{-37} ~ 1e-16
# max phase change (radians) across one 16-node panel
GL_PHASE = 10.0


class QuadratureError(RuntimeError):
    """Doubling the quadrature nodes changed the result too much."""


class ContourError(ValueError):
    """Parameters that would put the contour on a branch cut."""


@dataclass(frozen=True)
class ContourParams:
    """Shape parameters.

    Attributes
    ----------
    L : float
        Bulk parabola ``rho = |x - y| / (L t)``.
    theta : float
        Ray angle in ``(pi/2, pi)``.
    delta0 : float
        Ray offset in the bulk regime (zero in the fast regime).
    K : float or None
        Fast regime when ``|x - y| >= K t`` or ``t < 1``; default ``4 max(1, c*)``.
    rho_min : float
        Floor for ``rho``.
    eta, kappa : float
        Fast-regime parabola solves ``rho^2 t - rho eta d = -d^2 / (kappa t)``.
    nodes : int
        Gauss-Legendre nodes per panel.
    """

    L: float = 4.0
    theta: float = 7 * np.pi / 12
    delta0: float = 0.05
    K: float | None = None
    rho_min: float = 0.05
    eta: float = 1.0
    kappa: float = 4.0
    nodes: int = 16
    refine: int = 1

    def with_(self, **kw) -> "ContourParams":
        d = self.__dict__.copy()
        d.update(kw)
        return ContourParams(**d)


@dataclass(frozen=True)
class Segment:
    kind: str  # "parabola" or "ray"
    lo: float
    hi: float
    lam: np.ndarray = field(repr=False)
    wts: np.ndarray = field(repr=False)  # Gauss weight times dlam/ds

    def start(self) -> complex:
        return complex(self._point(self.lo))

    def end(self) -> complex:
        return complex(self._point(self.hi))

    _point: object = field(default=None, repr=False, compare=False)


@dataclass(frozen=True)
class ContourSpec:
    """Upper half of the inversion contour with quadrature nodes."""

    regime: str
    t: float
    rho: float
    delta0: float
    theta: float
    kstar: float
    ell1: float
    ell_max: float
    segments: tuple
    crosses_gamma_minus: bool = False

    @property
    def lam(self) -> np.ndarray:
        return np.concatenate([s.lam for s in self.segments])

    @property
    def wts(self) -> np.ndarray:
        return np.concatenate([s.wts for s in self.segments])

    def mismatch(self) -> float:
        """Gap between consecutive segments."""
        gaps = [abs(a.end() - b.start()) for a, b in zip(self.segments[:-1], self.segments[1:])]
        return max(gaps) if gaps else 0.0


def _graded_panels(lo, hi, width, w0, nodes):
    """Gauss-Legendre panels on ``[lo, hi]``: first width ``w0``, then at most
    doubling, capped by ``width(s)`` at each panel start."""
    xg, wg = np.polynomial.legendre.leggauss(nodes)
    edges = [lo]
    w = w0
    while edges[-1] < hi:
        a = edges[-1]
        w = min(w, width(a))
        b = min(a + w, hi)
        if hi - b < 0.25 * w:
            b = hi
        edges.append(b)
        w *= 2.0
    e = np.asarray(edges)
    a, b = e[:-1, None], e[1:, None]
    s = 0.5 * (b - a) * xg[None, :] + 0.5 * (a + b)
    return s.ravel(), (0.5 * (b - a) * wg[None, :]).ravel()


def _intersections(rho, theta, delta0):
    kstar = -rho / np.tan(theta) + np.sqrt(rho**2 / np.sin(theta) ** 2 + delta0)
    ell1 = 2 * rho * kstar / np.sin(theta)
    return float(kstar), float(ell1)


def build_contour(t: float, x: float, y: float, params: ContourParams | None = None, ctx: ModeContext | None = None,
                  *, dist_max: float | None = None, strict: bool = False) -> ContourSpec:
    """Parabola plus ray for the regime of ``(t, |x - y|)``.

    ``dist_max`` widens the panel resolution for matrix evaluations sharing one
    contour.  With ``strict`` a ray that dips left of Gamma_- raises
    :class:`ContourError`; otherwise it is only flagged.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    p = params or ContourParams()
    if not np.pi / 2 < p.theta < np.pi:
        raise ContourError("theta must lie in (pi/2, pi)")
    d = abs(x - y)
    cstar = ctx.model.cstar if ctx is not None and ctx.model is not None else 2.0
    K = p.K if p.K is not None else 4.0 * max(1.0, cstar)
    if d >= K * t or t < 1.0:
        regime = "fast"
        disc = p.eta**2 - 4.0 / p.kappa
        if disc < 0:
            raise ContourError("kappa too small for eta: no real rho")
        rho = d / t * (p.eta / 2 + 0.5 * np.sqrt(disc))
        delta0 = 0.0
    else:
        regime = "bulk"
        rho = d / (p.L * t)
        delta0 = p.delta0
    rho = max(rho, p.rho_min)
    theta = p.theta
    kstar, ell1 = _intersections(rho, theta, delta0)
    c = np.cos(theta)
    ell_max = ell1 + TRUNC / (t * abs(c))

    dm = d if dist_max is None else max(d, dist_max)
    n = p.nodes
    # parabola: phase rate 2 rho t + d in k, Gaussian width 1/sqrt(t)
    w_par = min(GL_PHASE / (2 * rho * t + dm + 1e-12), 3.0 / np.sqrt(t)) / p.refine
    ks, kw = _graded_panels(0.0, kstar, lambda k: w_par, w_par, n)
    sq = rho + 1j * ks
    par = Segment("parabola", 0.0, kstar, sq * sq, kw * 2j * sq, lambda k: (rho + 1j * k) ** 2)

    # ray: |dlam/dl| = 1, so the phase rate is t plus the sqrt(lam) d term;
    # panels start at the size of |lam| near the junction and double
    e = np.exp(1j * theta)

    def w_ray(ell):
        lam_abs = abs(-delta0 + e * ell)
        return GL_PHASE / (t + dm / (2 * np.sqrt(lam_abs))) / p.refine

    w0 = min(0.5 * (rho**2 + kstar**2), w_ray(ell1))
    ell, lw = _graded_panels(ell1, ell_max, w_ray, w0, n)
    ray = Segment("ray", ell1, ell_max, -delta0 + e * ell, lw * e, lambda l: -delta0 + e * l)

    crosses = False
    if ctx is not None and not ctx.pure_heat:
        from .model import gamma_minus_distance

        crosses = bool(np.any(gamma_minus_distance(ray.lam, ctx.model) <= 0))
        if crosses and strict:
            raise ContourError("ray passes left of Gamma_-")
    return ContourSpec(regime, float(t), float(rho), float(delta0), float(theta), kstar, ell1, float(ell_max),
                       (par, ray), crosses)


def shared_contour(t: float, params: ContourParams | None = None, ctx: ModeContext | None = None,
                   dist_max: float = 0.0) -> ContourSpec:
    """One contour for all ``(x, y)`` at time ``t`` (the ``x = y`` choice)."""
    return build_contour(t, 0.0, 0.0, params, ctx, dist_max=dist_max)


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GreenTimeSample:
    t: float
    x: float
    y: float
    value: float
    imag: float
    regime: str


def _accumulate(t, lam, wts, xs, ys, ctx: ModeContext, chunk_elems: float = 4e6):
    """``sum_k w_k e^{lam_k t} G_{lam_k}(x, y)`` for all ``x`` in ``xs``, ``y`` in ``ys``."""
    xs = np.atleast_1d(np.asarray(xs, float))
    ys = np.atleast_1d(np.asarray(ys, float))
    pts, inv = np.unique(np.concatenate([xs, ys]), return_inverse=True)
    ix, iy = inv[: xs.size], inv[xs.size:]
    right_mask = xs[:, None] >= ys[None, :]
    total = np.zeros((xs.size, ys.size), complex)
    kc = int(max(1, min(lam.size, chunk_elems // max(1, xs.size * ys.size), 256)))
    for k0 in range(0, lam.size, kc):
        la = lam[k0: k0 + kc]
        w = wts[k0: k0 + kc]
        tab = mode_table(la, pts, ctx)
        D = tab.D[:, iy]
        lt = (la * t)[:, None, None]
        # x >= y branch
        Ep = tab.Ep[:, ix][:, :, None] - tab.Ep[:, iy][:, None, :] + lt
        Ep = np.where(right_mask[None], Ep, -np.inf)
        gp = np.exp(Ep) * tab.Zp[:, ix, 0][:, :, None] * (tab.Zm[:, iy, 0] / D)[:, None, :]
        Em = tab.Em[:, ix][:, :, None] - tab.Em[:, iy][:, None, :] + lt
        Em = np.where(right_mask[None], -np.inf, Em)
        gm = np.exp(Em) * tab.Zm[:, ix, 0][:, :, None] * (tab.Zp[:, iy, 0] / D)[:, None, :]
        g = np.where(right_mask[None], gp, gm)
        total += np.tensordot(w, g, axes=(0, 0))
    return total


def green_time_matrix(t: float, xs, ys, ctx: ModeContext, contour: ContourSpec | None = None,
                      params: ContourParams | None = None, *, full: bool = False, band_ratio: float = 2.0,
                      skip_negligible: bool = False):
    """``G(t, x, y)`` on a product grid.

    Pairs are grouped into distance bands ``[d_lo, band_ratio d_lo)`` and each
    band gets a contour built for ``d_lo``, so that ``e^{-sqrt(lam) d}`` decays
    along it.  An explicit ``contour`` is used for every pair instead.  With
    ``full`` the lower half is integrated explicitly and the complex value of
    the whole contour integral is returned (its imaginary part should vanish).

    ``skip_negligible`` sets to zero the pairs where the drift-diffusion bound
    ``exp(t max zeta0 - (d - t max|zeta1|)_+^2 / (4 t))`` is below ``e^{-37}``.
    """
    xs = np.atleast_1d(np.asarray(xs, float))
    ys = np.atleast_1d(np.asarray(ys, float))
    if contour is not None:
        return _on_contour(t, xs, ys, ctx, contour, full)
    d = np.abs(xs[:, None] - ys[None, :])
    out = np.zeros(d.shape, complex if full else float)
    live = np.ones(d.shape, bool)
    if skip_negligible:
        grow = max(float(ctx.g0.max()), 0.0) if ctx.g0.size else 0.0
        drift = float(np.abs(ctx.g1).max()) if ctx.g1.size else 0.0
        live = grow * t - np.maximum(d - drift * t, 0.0) ** 2 / (4 * t) > -TRUNC
        if not live.any():
            return out
    dmax = d[live].max()
    edges = [0.0, 1.0]
    while edges[-1] <= dmax:
        edges.append(edges[-1] * band_ratio)
    for lo, hi in zip(edges[:-1], edges[1:]):
        sel = (d >= lo) & (d < hi) & live
        if not sel.any():
            continue
        rows = np.flatnonzero(sel.any(axis=1))
        cols = np.flatnonzero(sel.any(axis=0))
        c = build_contour(t, lo, 0.0, params, ctx, dist_max=hi)
        block = _on_contour(t, xs[rows], ys[cols], ctx, c, full)
        sub = sel[np.ix_(rows, cols)]
        tmp = out[np.ix_(rows, cols)]
        tmp[sub] = block[sub]
        out[np.ix_(rows, cols)] = tmp
    return out


def _on_contour(t, xs, ys, ctx, contour, full):
    lam, wts = contour.lam, contour.wts
    if full:
        # lower half traversed towards the real axis: nodes conj(lam), weights -conj(w)
        tot = _accumulate(t, np.concatenate([lam, lam.conj()]), np.concatenate([wts, -wts.conj()]), xs, ys, ctx)
        return tot / (2j * np.pi)
    return _accumulate(t, lam, wts, xs, ys, ctx).imag / np.pi


def green_time(t: float, x: float, y: float, ctx: ModeContext, contour: ContourSpec | None = None,
               params: ContourParams | None = None, *, check: bool = False, rtol: float = 1e-6) -> GreenTimeSample:
    """``G(t, x, y)`` on the contour adapted to ``(t, |x - y|)``.

    With ``check`` the nodes are doubled and :class:`QuadratureError` is raised
    if the value moves by more than ``rtol`` relative.
    """
    p = params or ContourParams()
    if contour is None:
        contour = build_contour(t, x, y, p, ctx)
    full = green_time_matrix(t, [x], [y], ctx, contour, full=True)[0, 0]
    if check:
        fine = build_contour(t, x, y, p.with_(refine=2 * p.refine), ctx)
        v2 = green_time_matrix(t, [x], [y], ctx, fine)[0, 0]
        if abs(v2 - full.real) > rtol * abs(v2) + 1e-300:
            raise QuadratureError(f"refinement changed G({t},{x},{y}) from {full.real:.12g} to {v2:.12g}")
    return GreenTimeSample(float(t), float(x), float(y), float(full.real), float(full.imag), contour.regime)


def heat_kernel(t, x, y):
    return np.exp(-((np.asarray(x) - np.asarray(y)) ** 2) / (4 * t)) / np.sqrt(4 * np.pi * t)


# ---------------------------------------------------------------------------
# bounds and rates
# ---------------------------------------------------------------------------


def sup_near_diagonal(t, ctx: ModeContext, y0: float = 0.0, width: float = 1.0, n: int = 21,
                      params: ContourParams | None = None) -> float:
    """``sup_{|x - y0| <= width} |G(t, x, y0)|``."""
    xs = np.linspace(y0 - width, y0 + width, n)
    return float(np.max(np.abs(green_time_matrix(t, xs, [y0], ctx, params=params))))


def decay_slope(ctx: ModeContext, ts=None, y0: float = 0.0, params: ContourParams | None = None):
    """Least-squares slope of ``log sup_{|x - y0| <= 1} |G|`` against ``log t``.

    Returns ``(slope, ts, sups)``.
    """
    ts = np.geomspace(10.0, 200.0, 6) if ts is None else np.asarray(ts, float)
    sups = np.array([sup_near_diagonal(t, ctx, y0, params=params) for t in ts])
    slope = float(np.polyfit(np.log(ts), np.log(sups), 1)[0])
    return slope, ts, sups


def profile_kappa(t: float, y0: float, ctx: ModeContext, half_width: float | None = None, n: int = 41) -> float:
    """``kappa`` from a quadratic fit of ``log|G(t, ., y0)|`` in ``x - y0``."""
    hw = 2.0 * np.sqrt(t) if half_width is None else half_width
    xs = y0 + np.linspace(-hw, hw, n)
    g = np.abs(green_time_matrix(t, xs, [y0], ctx)[:, 0])
    a2 = np.polyfit(xs - y0, np.log(g), 2)[0]
    if a2 >= 0:
        raise ArithmeticError("log-profile is not concave")
    return float(-1.0 / (a2 * t))


def verify_time_bounds(ts, xs, ys, ctx: ModeContext, kappa: float = 16.0, r: float = 0.05,
                       params: ContourParams | None = None) -> dict:
    """Sup of ``|G| / envelope`` per regime.

    fast: ``t^{-1/2} e^{-d^2/(kappa t)}``; bulk:
    ``(1 + d) t^{-3/2} e^{-d^2/(kappa t)} + e^{-r t}`` with ``d = |x - y|``.
    """
    p = params or ContourParams()
    cstar = ctx.model.cstar if ctx.model is not None else 2.0
    K = p.K if p.K is not None else 4.0 * max(1.0, cstar)
    xs = np.asarray(xs, float)
    ys = np.asarray(ys, float)
    out = {"kappa": float(kappa), "r": float(r), "C_fast": 0.0, "C_bulk": 0.0}
    for t in np.atleast_1d(ts):
        G = green_time_matrix(t, xs, ys, ctx, params=p)
        d = np.abs(xs[:, None] - ys[None, :])
        gauss = np.exp(-(d**2) / (kappa * t))
        fast = (d >= K * t) | (t < 1.0)
        env_fast = gauss / np.sqrt(t)
        env_bulk = (1 + d) / t**1.5 * gauss + np.exp(-r * t)
        ratio = np.abs(G) / np.where(fast, env_fast, env_bulk)
        if fast.any():
            out["C_fast"] = max(out["C_fast"], float(ratio[fast].max()))
        if (~fast).any():
            out["C_bulk"] = max(out["C_bulk"], float(ratio[~fast].max()))
    return out


def convolve_green(t: float, h_values, ygrid, xs, ctx: ModeContext, params: ContourParams | None = None,
                   contour: ContourSpec | None = None):
    """``int G(t, x, y) h(y) dy`` by the trapezoidal rule on ``ygrid``.

    Points where ``h`` vanishes identically are skipped.
    """
    ygrid = np.asarray(ygrid, float)
    h_values = np.asarray(h_values, float)
    xs = np.atleast_1d(np.asarray(xs, float))
    w = np.full(ygrid.size, ygrid[1] - ygrid[0])
    w[0] *= 0.5
    w[-1] *= 0.5
    keep = np.abs(h_values) > 0
    if not keep.any():
        return np.zeros(xs.size)
    G = green_time_matrix(t, xs, ygrid[keep], ctx, contour=contour, params=params, skip_negligible=contour is None)
    return G @ (w[keep] * h_values[keep])
