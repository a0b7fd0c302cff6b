"""Pointwise resolvent kernel ``G_lam(x, y)`` and its bound checks.

``(L - lam) G_lam(., y) = -delta_y`` with

    G_lam(x, y) = phi+(x) phi-(y) / W(y)   for x >= y,
                  phi-(x) phi+(y) / W(y)   for x <= y,

evaluated in exponent form so that nothing overflows.  The derivative jumps
by ``-1`` across ``x = y``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .modes import (
    ModeContext,
    SpectralPoint,
    in_omega_delta,
    mode_envelopes,
    M_LARGE,
    M_SMALL,
)

__all__ = [
    "ModeTable",
    "mode_table",
    "green_from_table",
    "green_lambda",
    "green_lambda_dx",
    "green_residual",
    "resolvent_oracle",
    "REGIMES",
    "classify_regime",
    "regime_envelope",
    "verify_small_lambda_bounds",
    "verify_large_lambda_bound",
    "GreenLambdaSample",
]


@dataclass(frozen=True)
class ModeTable:
    """phi+ and phi- envelopes at a set of points for a batch of ``lam``."""

    lam: np.ndarray
    x: np.ndarray
    Ep: np.ndarray
    Zp: np.ndarray
    Em: np.ndarray
    Zm: np.ndarray

    @property
    def D(self):
        """Envelope Wronskian ``Zp_1 Zm_2 - Zp_2 Zm_1``."""
        return self.Zp[..., 0] * self.Zm[..., 1] - self.Zp[..., 1] * self.Zm[..., 0]


def mode_table(lam, x, ctx: ModeContext) -> ModeTable:
    lam = np.atleast_1d(np.asarray(lam, complex))
    x = np.atleast_1d(np.asarray(x, float))
    Ep, Zp = mode_envelopes("phi_plus", lam, x, ctx)
    Em, Zm = mode_envelopes("phi_minus", lam, x, ctx)
    return ModeTable(lam, x, Ep, Zp, Em, Zm)


def green_from_table(tab: ModeTable, ix, iy, deriv: int = 0):
    """``G_lam(x[ix], x[iy])`` for index arrays broadcast against each other.

    With ``deriv=1`` returns ``d/dx G`` (one-sided from the branch ``x >= y``
    when ``x == y``).
    """
    ix = np.asarray(ix)
    iy = np.asarray(iy)
    xx, yy = tab.x[ix], tab.x[iy]
    D = tab.D[:, iy]
    c = 1 if deriv else 0
    right = np.exp(tab.Ep[:, ix] - tab.Ep[:, iy]) * tab.Zp[:, ix, c] * tab.Zm[:, iy, 0] / D
    left = np.exp(tab.Em[:, ix] - tab.Em[:, iy]) * tab.Zm[:, ix, c] * tab.Zp[:, iy, 0] / D
    return np.where(xx >= yy, right, left)


def green_lambda(lam, x, y, ctx: ModeContext) -> np.ndarray:
    """``G_lam(x, y)`` for every ``lam`` and every pair of ``x``, ``y``.

    Returns shape ``(K, Qx, Qy)``, with singleton axes squeezed out for scalar
    inputs.
    """
    if isinstance(lam, SpectralPoint):
        lam = lam.lam
    scalar_l = np.ndim(lam) == 0
    scalar_x, scalar_y = np.ndim(x) == 0, np.ndim(y) == 0
    x = np.atleast_1d(np.asarray(x, float))
    y = np.atleast_1d(np.asarray(y, float))
    pts, inv = np.unique(np.concatenate([x, y]), return_inverse=True)
    tab = mode_table(lam, pts, ctx)
    ix = inv[: x.size][:, None]
    iy = inv[x.size:][None, :]
    G = green_from_table(tab, ix, iy)
    if scalar_y:
        G = G[:, :, 0]
    if scalar_x:
        G = G[:, 0]
    if scalar_l:
        G = G[0]
    return G


def green_lambda_dx(lam, x, y, ctx: ModeContext, side: str = "right"):
    """``d/dx G_lam(x, y)``; at ``x == y`` the limit from ``side``."""
    x = np.atleast_1d(np.asarray(x, float))
    pts, inv = np.unique(np.concatenate([x, [y]]), return_inverse=True)
    tab = mode_table(lam, pts, ctx)
    ix, iy = inv[:-1], inv[-1]
    if side == "right":
        return green_from_table(tab, ix, iy, deriv=1)
    # left branch forced
    D = tab.D[:, iy]
    return np.exp(tab.Em[:, ix] - tab.Em[:, iy]) * tab.Zm[:, ix, 1] * tab.Zp[:, iy, 0] / D[:, None]


def green_residual(lam, y, ctx: ModeContext, x=None, dx: float = 0.02, gap: float = 0.05):
    """Max of ``|(L - lam) G(., y)|`` by fourth-order centred differences.

    Stencils straddling ``x = y`` or the weight junctions ``x = +/-1`` (where
    the third derivative of ``G`` jumps) are skipped.  Normalised by
    ``max(1, max |G|)``.  ``dx`` should not be much smaller than the sweep
    step, or step-to-step rounding of the modes dominates.
    """
    if x is None:
        x = np.linspace(y - 10, y + 10, 401)
    x = np.asarray(x, float)
    keep = np.abs(x - y) > gap + 2 * dx
    if not ctx.pure_heat:
        keep &= (np.abs(x - 1.0) > gap + 2 * dx) & (np.abs(x + 1.0) > gap + 2 * dx)
    x = x[keep]
    offs = (-2, -1, 0, 1, 2)
    pts = np.concatenate([x + k * dx for k in offs])
    G = green_lambda(lam, pts, y, ctx).reshape(5, x.size)
    gmm, gm, g0, gp, gpp = G
    d2 = (-gpp + 16 * gp - 30 * g0 + 16 * gm - gmm) / (12 * dx**2)
    d1 = (-gpp + 8 * gp - 8 * gm + gmm) / (12 * dx)
    z0, z1 = ctx.zeta(x)
    r = d2 + z1 * d1 + (z0 - lam) * g0
    return float(np.max(np.abs(r)) / max(1.0, np.max(np.abs(g0))))


# ---------------------------------------------------------------------------
# brute-force oracle
# ---------------------------------------------------------------------------


def _fd_resolvent(lam, y, ctx: ModeContext, h: float):
    """Centred differences with exact asymptotic Robin conditions at both ends."""
    X_L, X_R = ctx.X_L, ctx.X_R
    n_l, n_r = round(-X_L / h), round(X_R / h)
    x = h * np.arange(-n_l, n_r + 1, dtype=float)
    N = x.size
    z0, z1 = ctx.zeta(x)
    lo = 1 / h**2 - z1 / (2 * h)
    hi = 1 / h**2 + z1 / (2 * h)
    mid = -2 / h**2 + z0 - lam
    lo = lo.astype(complex)
    hi = hi.astype(complex)
    mid = mid.astype(complex)
    # ghost points: g' = mu+ g on the left, g' = -sqrt(lam) g on the right
    mu_p = complex(ctx.mu(lam, +1))
    s = np.sqrt(complex(lam))
    mid[0] += lo[0] * (-2 * h * mu_p)
    hi0 = hi[0] + lo[0]
    mid[-1] += hi[-1] * (-2 * h * s)
    loN = lo[-1] + hi[-1]
    diag_lo = np.concatenate([lo[1:-1], [loN]])
    diag_hi = np.concatenate([[hi0], hi[1:-1]])
    A = sp.diags([diag_lo, mid, diag_hi], [-1, 0, 1], format="csc")
    j = int(round((y - x[0]) / h))
    if not np.isclose(x[j], y):
        raise ValueError("y must be a node of the oracle grid")
    rhs = np.zeros(N, complex)
    rhs[j] = -1.0 / h
    return x, splu(A).solve(rhs)


def resolvent_oracle(lam, y, ctx: ModeContext, h: float = 0.02, richardson: bool = True):
    """Discrete resolvent ``(L_h - lam) g = -e_y / h`` on ``[X_L, X_R]``.

    With ``richardson`` the solutions on ``h`` and ``h/2`` are combined to
    remove the ``O(h^2)`` error.  Returns ``(x, g)`` on the coarse grid.
    """
    x, g = _fd_resolvent(lam, y, ctx, h)
    if not richardson:
        return x, g
    _, g2 = _fd_resolvent(lam, y, ctx, h / 2)
    return x, (4 * g2[::2] - g) / 3


# ---------------------------------------------------------------------------
# bound verification
# ---------------------------------------------------------------------------

REGIMES = ("i", "ii", "iii", "iv", "v", "vi")


@dataclass(frozen=True)
class GreenLambdaSample:
    lam: complex
    x: float
    y: float
    value: complex
    regime: str


def classify_regime(x, y) -> np.ndarray:
    """Ordering of ``(x, y)`` relative to 0 as a regime label."""
    x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
    out = np.empty(x.shape, dtype="<U3")
    out[(y <= 0) & (0 <= x)] = "i"
    out[(x <= 0) & (0 <= y)] = "ii"
    out[(0 <= y) & (y <= x)] = "iii"
    out[(0 <= x) & (x <= y)] = "iv"
    out[(y <= x) & (x <= 0)] = "v"
    out[(x <= y) & (y <= 0)] = "vi"
    # x = y = 0 and similar ties resolve to the last matching label
    return out


def regime_envelope(lam, x, y, ctx: ModeContext, alpha: float | None = None):
    """Modulus of the predicted envelope for the regime of each ``(x, y)``."""
    alpha = ctx.model.alpha if alpha is None else alpha
    lam = complex(lam)
    s = np.sqrt(lam)
    mp, mm = complex(ctx.mu(lam, +1)), complex(ctx.mu(lam, -1))
    x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
    reg = classify_regime(x, y)
    env = {
        "i": -s * (x - y) + (mp - s) * y,
        "ii": s * (x - y) + (mp - s) * x,
        "iii": -s * (x - y) + (s - alpha) * y,
        "iv": s * (x - y) + (s - alpha) * x,
        "v": mm * (x - y),
        "vi": mp * (x - y),
    }
    logenv = np.zeros(x.shape)
    for k, v in env.items():
        logenv = np.where(reg == k, np.real(v), logenv)
    return np.exp(logenv), reg


def verify_small_lambda_bounds(lams, xs, ys, ctx: ModeContext) -> dict:
    """Max of ``|G| / envelope`` per regime over the product grid.

    Raises ``ValueError`` if some ``lam`` is outside the small region.
    """
    lams = np.atleast_1d(np.asarray(lams, complex))
    if np.any(np.abs(lams) > M_SMALL) or np.any((lams.imag == 0) & (lams.real < 0)):
        raise ValueError("small-lambda bounds need |lam| <= M_s and lam off the negative axis")
    if ctx.model is not None:
        from .model import gamma_minus_distance

        if np.any(gamma_minus_distance(lams, ctx.model) <= 0):
            raise ValueError("lambda left of Gamma_-")
    xs = np.asarray(xs, float)
    ys = np.asarray(ys, float)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    G = green_lambda(lams, xs, ys, ctx)
    report = {k: 0.0 for k in REGIMES}
    for k, lam in enumerate(lams):
        env, reg = regime_envelope(lam, X, Y, ctx)
        ratio = np.abs(G[k]) / env
        for r in REGIMES:
            sel = reg == r
            if sel.any():
                report[r] = max(report[r], float(ratio[sel].max()))
    return report


def verify_large_lambda_bound(lams, dists, ctx: ModeContext, y0: float = 0.0) -> dict:
    """Fit ``|G| <= C / sqrt|lam| exp(-eta sqrt|lam| |x - y|)``.

    ``eta`` is the smallest least-squares slope of ``-log|G|`` against
    ``sqrt|lam| |x - y|`` over both sides of ``y0``; ``C`` is then the sup of
    the scaled modulus.
    """
    lams = np.atleast_1d(np.asarray(lams, complex))
    if np.any(np.abs(lams) < M_LARGE) or not np.all(in_omega_delta(lams)):
        raise ValueError("large-lambda bound needs |lam| >= M_l inside Omega_delta")
    d = np.asarray(dists, float)
    xs = np.concatenate([y0 - d[::-1], y0 + d])
    G = green_lambda(lams, xs, y0, ctx)
    r = np.sqrt(np.abs(lams))
    etas, slopes = [], []
    for k in range(lams.size):
        for side in (slice(0, d.size), slice(d.size, None)):
            u = r[k] * np.abs(xs[side] - y0)
            v = -np.log(np.abs(G[k, side]) * r[k])
            slope = np.polyfit(u, v, 1)[0]
            slopes.append(slope)
    eta = float(min(slopes))
    C = float(np.max(np.abs(G) * r[:, None] * np.exp(eta * r[:, None] * np.abs(xs - y0)[None, :])))
    return {"eta": eta, "C": C, "slopes": slopes}
