"""Critical front ``q'' + c* q' + f(q) = 0`` and its weak exponential tail.

The profile is computed by damped Newton iteration on a three-point centred
discretisation.  Left of the origin the plain centred stencil is used; right
of it the stencil is exponentially fitted,

    (e^{g h} q_{j+1} - 2 q_j + e^{-g h} q_{j-1}) / h^2 - g^2 q_j + f(q_j),

which equals the plain operator on ``s = q e^{g x}`` and reproduces the
``(a + b x) e^{-g x}`` tail exactly.  Unknowns are ``q`` on the left and ``s`` on
the right so that every unknown is of order one.  The left end carries the
unstable-manifold condition ``q' = mu (q - 1)`` and the translation is fixed by
``q(0) = 1/2``; the right end is left free.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import CubicSpline
from scipy.sparse.linalg import spsolve

from .model import ModelParams, Nonlinearity, Weight

__all__ = [
    "FrontProfile",
    "FrontSolveError",
    "solve_front",
    "fit_asymptotics",
    "derivative_mode",
    "front_residual",
]


class FrontSolveError(RuntimeError):
    """Newton iteration failed or produced a non-monotone profile."""


@dataclass(frozen=True)
class FrontProfile:
    """Sampled critical front.

    Attributes
    ----------
    grid : ndarray
        Uniform nodes on ``[X-, X+]`` containing ``x = 0``.
    q, dq : ndarray
        Front and derivative at the nodes.
    a, b : float
        Tail coefficients, ``q ~ (a + b x) e^{-g* x}``.
    residual : float
        Max discrete residual at interior nodes.
    gstar, cstar, mu_left : float
        Tail rates used for extension beyond the grid.
    """

    grid: np.ndarray
    q: np.ndarray
    dq: np.ndarray
    a: float
    b: float
    residual: float
    gstar: float
    cstar: float
    mu_left: float
    _left: CubicSpline = field(repr=False, compare=False)
    _right: CubicSpline = field(repr=False, compare=False)

    @property
    def h(self) -> float:
        return float(self.grid[1] - self.grid[0])

    def s_at(self, x):
        """Tail variable ``q e^{g* x}`` (valid for ``x >= 0``)."""
        x = np.asarray(x, dtype=float)
        xr = self.grid[-1]
        out = np.where(x > xr, self.a + self.b * x, self._right(np.clip(x, 0.0, xr)))
        return out

    def q_at(self, x):
        x = np.asarray(x, dtype=float)
        x0 = self.grid[0]
        left = self._left(np.clip(x, x0, 0.0))
        far_left = 1.0 - (1.0 - self.q[0]) * np.exp(self.mu_left * (np.minimum(x, x0) - x0))
        right = self.s_at(np.maximum(x, 0.0)) * np.exp(-self.gstar * np.maximum(x, 0.0))
        out = np.where(x < x0, far_left, np.where(x <= 0.0, left, right))
        return out if out.ndim else float(out)

    def dq_at(self, x):
        x = np.asarray(x, dtype=float)
        x0, xr = self.grid[0], self.grid[-1]
        g = self.gstar
        left = self._left(np.clip(x, x0, 0.0), 1)
        far_left = -(1.0 - self.q[0]) * self.mu_left * np.exp(
            self.mu_left * (np.minimum(x, x0) - x0)
        )
        xp = np.maximum(x, 0.0)
        ds = np.where(xp > xr, self.b, self._right(np.clip(xp, 0.0, xr), 1))
        right = (ds - g * self.s_at(xp)) * np.exp(-g * xp)
        out = np.where(x < x0, far_left, np.where(x <= 0.0, left, right))
        return out if out.ndim else float(out)

    def scaled_dq_at(self, x):
        """``q'(x) e^{g* x}`` for ``x >= 0``; finite deep in the right tail."""
        x = np.asarray(x, dtype=float)
        xr = self.grid[-1]
        ds = np.where(x > xr, self.b, self._right(np.clip(x, 0.0, xr), 1))
        return ds - self.gstar * self.s_at(x)


def _unstable_rate(m: ModelParams) -> float:
    # growth rate of q - 1 at -infinity
    return -m.cstar / 2.0 + np.sqrt(m.cstar**2 / 4.0 - m.f1at1)


def _discrete_residual(q, x, h, m: ModelParams, nl: Nonlinearity):
    """Residual of the hybrid scheme at interior nodes, in units of ``q``."""
    g, c = m.gstar, m.cstar
    qm, q0, qp = q[:-2], q[1:-1], q[2:]
    xi = x[1:-1]
    plain = (qp - 2 * q0 + qm) / h**2 + c * (qp - qm) / (2 * h) + nl.f(q0)
    fitted = (np.exp(g * h) * qp - 2 * q0 + np.exp(-g * h) * qm) / h**2 - g * g * q0 + nl.f(q0)
    return np.where(xi > 0.0, fitted, plain)


def front_residual(p: FrontProfile, m: ModelParams, nl: Nonlinearity) -> np.ndarray:
    """Discrete residual of ``p`` at interior nodes (same stencil as the solver)."""
    return _discrete_residual(p.q, p.grid, p.h, m, nl)


def _initial_guess(x, m: ModelParams, kind: int):
    g = m.gstar
    if kind == 0:
        return 1.0 / (1.0 + np.exp(np.clip(g * x, -700, 700)))
    # slower logistic
    z = 0.6 * g * x
    base = 1.0 / (1.0 + np.exp(np.clip(z, -700, 700)))
    return base


def solve_front(
    nl: Nonlinearity,
    m: ModelParams,
    X_minus: float = -60.0,
    X_plus: float = 60.0,
    h: float = 0.02,
    *,
    init: int = 0,
    tol: float = 1e-9,
    max_iter: int = 60,
    check_truncation: bool = True,
) -> FrontProfile:
    """Solve for the critical front on ``[X_minus, X_plus]`` with ``q(0) = 1/2``.

    Raises
    ------
    FrontSolveError
        If Newton does not reach ``tol`` or the result is not monotone.
    """
    if check_truncation and not (X_minus < -10.0 / m.beta and X_plus > 20.0 / m.gstar):
        raise ValueError("truncation too short: need X- < -10/beta and X+ > 20/g*")
    n_left = round(-X_minus / h)
    n_right = round(X_plus / h)
    if not (np.isclose(n_left * h, -X_minus) and np.isclose(n_right * h, X_plus)):
        raise ValueError("X_minus and X_plus must be integer multiples of h")
    x = h * np.arange(-n_left, n_right + 1, dtype=float)
    x[n_left] = 0.0
    N = x.size
    j0 = n_left
    g, c = m.gstar, m.cstar
    mu = _unstable_rate(m)
    # unknown v = q * scale, scale = e^{g x} on the right
    scale = np.exp(g * np.maximum(x, 0.0))
    right = x > 0.0

    q = _initial_guess(x, m, init)
    v = q * scale

    eg_p, eg_m = np.exp(g * h), np.exp(-g * h)
    lo = np.where(x[1:-1] > 0, eg_m, 1.0) / h**2 - np.where(x[1:-1] > 0, 0.0, c / (2 * h))
    hi = np.where(x[1:-1] > 0, eg_p, 1.0) / h**2 + np.where(x[1:-1] > 0, 0.0, c / (2 * h))
    mid0 = -2.0 / h**2 - np.where(x[1:-1] > 0, g * g, 0.0)

    def residual(v):
        q = v / scale
        R = np.empty(N)
        R[0] = (-3 * q[0] + 4 * q[1] - q[2]) / (2 * h) - mu * (q[0] - 1.0)
        R[1:-1] = lo * q[:-2] + mid0 * q[1:-1] + hi * q[2:] + nl.f(q[1:-1])
        R[-1] = q[j0] - 0.5
        return R

    def jacobian(v):
        q = v / scale
        rows, cols, vals = [], [], []
        # row 0: left boundary
        rows += [0, 0, 0]
        cols += [0, 1, 2]
        vals += [-3 / (2 * h) - mu, 4 / (2 * h), -1 / (2 * h)]
        idx = np.arange(1, N - 1)
        rows += list(np.repeat(idx, 3))
        cc = np.stack([idx - 1, idx, idx + 1], axis=1).ravel()
        vv = np.stack([lo, mid0 + nl.f1(q[1:-1]), hi], axis=1).ravel()
        cols += list(cc)
        vals += list(vv)
        rows.append(N - 1)
        cols.append(j0)
        vals.append(1.0)
        J = sp.csc_matrix((vals, (rows, cols)), shape=(N, N))
        # chain rule for dq/dv
        return J @ sp.diags(1.0 / scale)

    row_scale = np.where(np.concatenate([[0.0], x[1:-1], [0.0]]) > 0, scale, 1.0)

    R = residual(v)
    rnorm = np.max(np.abs(R))
    # iterate to the rounding floor, accept anything below tol
    for _ in range(max_iter):
        if rnorm < 1e-3 * tol:
            break
        J = jacobian(v)
        D = sp.diags(row_scale)
        dv = spsolve((D @ J).tocsc(), -row_scale * R)
        step = 1.0
        while step > 1e-6:
            v_new = v + step * dv
            R_new = residual(v_new)
            r_new = np.max(np.abs(R_new))
            if np.isfinite(r_new) and r_new < (1 - 1e-4 * step) * rnorm:
                break
            step *= 0.5
        else:
            if rnorm < tol:
                break
            raise FrontSolveError(f"line search failed (residual {rnorm:.3e})")
        v, R, rnorm = v_new, R_new, r_new
    if rnorm >= tol:
        raise FrontSolveError(f"Newton did not converge (residual {rnorm:.3e})")

    q = v / scale
    s = q * np.exp(g * x)  # only used on x >= 0
    left = CubicSpline(x[: j0 + 1], q[: j0 + 1])
    right_spline = CubicSpline(x[j0:], s[j0:])
    dq = np.concatenate([left(x[:j0], 1), (right_spline(x[j0:], 1) - g * s[j0:]) * np.exp(-g * x[j0:])])
    resid = float(np.max(np.abs(_discrete_residual(q, x, h, m, nl))))

    # provisional tail coefficients from the last fifth of the grid
    a, b, _ = _fit_line(x, s, (0.6 * X_plus, X_plus))
    prof = FrontProfile(
        grid=x,
        q=q,
        dq=dq,
        a=a,
        b=b,
        residual=resid,
        gstar=g,
        cstar=c,
        mu_left=mu,
        _left=left,
        _right=right_spline,
    )
    # strict decrease wherever q is distinguishable from 1 in double precision
    core = 1.0 - q > 1e-10
    dqq = np.diff(q)
    if not (np.all(dqq <= 1e-14) and np.all(dqq[core[1:]] < 0)
            and np.all(dq[1:-1][core[1:-1]] < 0) and np.all(dq[1:-1] < 1e-12)):
        raise FrontSolveError("profile is not strictly decreasing")
    return prof


def _fit_line(x, s, window):
    sel = (x >= window[0]) & (x <= window[1])
    if sel.sum() < 3:
        raise ValueError("fit window contains fewer than three nodes")
    A = np.stack([np.ones(sel.sum()), x[sel]], axis=1)
    coef, *_ = np.linalg.lstsq(A, s[sel], rcond=None)
    fit = A @ coef
    err = float(np.max(np.abs(fit - s[sel])) / np.max(np.abs(s[sel])))
    return float(coef[0]), float(coef[1]), err


def fit_asymptotics(p, m: ModelParams, window=(20.0, 45.0)):
    """Least-squares fit of ``q(x) e^{g* x} = a + b x`` over ``window``.

    ``p`` may be a :class:`FrontProfile` or a pair ``(x, q)`` of arrays.

    Returns
    -------
    a, b : float
    fit_err : float
        Max relative deviation of the fitted line over the window.
    """
    if isinstance(p, FrontProfile):
        x = p.grid
        s = np.where(x >= 0, p.s_at(np.maximum(x, 0.0)), 0.0)
    else:
        x, q = (np.asarray(v, dtype=float) for v in p)
        s = q * np.exp(m.gstar * x)
    if window[0] < 10.0 / m.gstar:
        raise ValueError("fit window must start at x >= 10/g* (far tail)")
    a, b, err = _fit_line(x, s, window)
    return a, b, err


def derivative_mode(p: FrontProfile, w: Weight):
    """Return ``x -> q*'(x) / w(x)``, the exact decaying solution at ``lambda = 0``."""

    def phi(x):
        x = np.asarray(x, dtype=float)
        # for x >= 1, 1/w = e^{g x}: use the scaled tail derivative
        tail = p.scaled_dq_at(np.maximum(x, 1.0))
        inner = p.dq_at(x) / w.omega(x)
        out = np.where(x >= 1.0, tail, inner)
        return out if out.ndim else float(out)

    return phi
