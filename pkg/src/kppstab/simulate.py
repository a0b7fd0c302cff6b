"""Time stepping for the weighted perturbation equation and the full front equation.

The weighted perturbation ``p`` solves

    p_t = p_xx + zeta1 p_x + zeta0 p + N(q*, w p) p,

with ``N(mu, nu) = (f(mu + nu) - f(mu) - f'(mu) nu) / nu``.  Space is
discretised by centred differences on a uniform grid with homogeneous
Dirichlet ends.  Time uses second-order IMEX BDF: the linear part is implicit
(one sparse LU per run) and only ``N`` is explicit, started by one
backward-Euler step.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.integrate import quad
from scipy.sparse.linalg import splu

from .laplace import ContourParams, green_time_matrix
from .model import Nonlinearity
from .modes import ModeContext

__all__ = [
    "GuardBandError",
    "BlowUpError",
    "remainder_N",
    "Simulator",
    "SimState",
    "DecayReport",
    "step_linear",
    "step_nonlinear",
    "run_decay_experiment",
    "run_full_u",
    "delta_approximant",
    "duhamel_residual",
    "convolution_inequality_check",
    "chi",
    "omega_inf_closed_form",
]

X_MINUS = -120.0
X_PLUS = 150.0
NU_SMALL = 1e-8


class GuardBandError(ValueError):
    """``u = q* + w p`` left ``[-0.1, 1.1]``."""


class BlowUpError(FloatingPointError):
    """Sup norm grew by more than 10x in one step."""


# ---------------------------------------------------------------------------
# nonlinear remainder
# ---------------------------------------------------------------------------

# closed forms of N(mu, nu) for the registered polynomial nonlinearities
_EXACT_N = {
    "kpp": lambda mu, nu: -nu,
    "cubic": lambda mu, nu: -3.0 * mu * nu - nu * nu,
}


def remainder_N(mu, nu, nl: Nonlinearity):
    """``N(mu, nu)``; uses ``f''(mu) nu / 2`` below ``|nu| = 1e-8``."""
    mu = np.asarray(mu, float)
    nu = np.asarray(nu, float)
    if nl.name in _EXACT_N:
        return _EXACT_N[nl.name](mu, nu) + 0.0 * mu
    small = np.abs(nu) < NU_SMALL
    safe = np.where(small, 1.0, nu)
    full = (nl.f(mu + safe) - nl.f(mu) - nl.f1(mu) * safe) / safe
    return np.where(small, 0.5 * nl.f2(mu) * nu, full)


def chi(R: float, nl: Nonlinearity, n: int = 4001) -> float:
    """``sup_{|s| <= R + 1} |f''(s)| / 2`` (sampled)."""
    s = np.linspace(-R - 1.0, R + 1.0, n)
    return float(np.max(np.abs(nl.f2(s)))) / 2.0


def omega_inf_closed_form(beta: float, gstar: float, weight=None) -> float:
    """``sup (1 + |x|) w(x)`` from the two exponential branches and the bridge.

    On ``x <= -1`` the maximum of ``(1 - x) e^{beta x}`` sits at ``x = 1 - 1/beta``
    (or at ``-1``); on ``x >= 1`` the function ``(1 + x) e^{-g x}`` peaks at
    ``max(1, 1/g - 1)``.  The bridge is sampled on ``[-1, 1]``.
    """
    xl = min(-1.0, 1.0 - 1.0 / beta)
    left = (1.0 - xl) * np.exp(beta * xl)
    xr = max(1.0, 1.0 / gstar - 1.0)
    right = (1.0 + xr) * np.exp(-gstar * xr)
    mid = 0.0
    if weight is not None:
        x = np.linspace(-1.0, 1.0, 20001)
        mid = float(np.max((1.0 + np.abs(x)) * weight.omega(x)))
    return float(max(left, right, mid))


# ---------------------------------------------------------------------------
# discretisation
# ---------------------------------------------------------------------------


def _uniform_grid(X0, X1, h):
    n = round((X1 - X0) / h)
    if not np.isclose(n * h, X1 - X0):
        raise ValueError("domain length must be a multiple of h")
    return X0 + h * np.arange(n + 1, dtype=float)


def _tridiag(a_diff, a_adv, a_react, h):
    """Interior matrix of ``a_diff u'' + a_adv u' + a_react u`` with zero Dirichlet ends."""
    lo = a_diff / h**2 - a_adv / (2 * h)
    di = -2.0 * a_diff / h**2 + a_react
    up = a_diff / h**2 + a_adv / (2 * h)
    return sp.diags([lo[1:], di, up[:-1]], [-1, 0, 1], format="csc")


class Simulator:
    """Discrete weighted linearisation plus the nonlinear coupling.

    Parameters
    ----------
    ctx : ModeContext
        Supplies ``zeta0, zeta1``, the front, the weight and ``f``.  For the
        pure-heat context only linear runs are available.
    X : (float, float)
        Truncated domain, Dirichlet at both ends.
    h, dt : float
        Grid step and time step.  The implicit treatment of the whole linear
        part makes the scheme free of a diffusive or advective step limit;
        only the explicit ``N`` term needs ``dt |w p| f''`` small, which holds
        by a wide margin at perturbation amplitudes below the guard band.
    form : {"zeta", "conjugate"}
        ``"zeta"`` differences the coefficient form ``p'' + zeta1 p' + zeta0 p``;
        ``"conjugate"`` uses ``W^{-1} A W`` where ``A`` differences
        ``u'' + c* u' + f'(q*) u`` and ``W = diag(w)``, which makes the
        weighted and unweighted schemes algebraically identical.
    """

    def __init__(self, ctx: ModeContext, X=(X_MINUS, X_PLUS), h: float = 0.02, dt: float = 0.01,
                 form: str = "zeta"):
        self.ctx = ctx
        self.h = float(h)
        self.dt = float(dt)
        self.form = form
        self.x = _uniform_grid(X[0], X[1], h)
        xi = self.x[1:-1]
        if ctx.pure_heat:
            self.omega = np.ones_like(self.x)
            self.q = None
        else:
            self.omega = ctx.weight.omega(self.x)
            self.q = ctx.front.q_at(self.x)
        if form == "zeta":
            z0, z1 = ctx.zeta(xi)
            self.L = _tridiag(np.ones_like(xi), z1, z0, h)
        elif form == "conjugate" and not ctx.pure_heat:
            A = _tridiag(np.ones_like(xi), np.full_like(xi, ctx.model.cstar), ctx.nl.f1(self.q[1:-1]), h)
            wi = self.omega[1:-1]
            self.L = (sp.diags(1.0 / wi) @ A @ sp.diags(wi)).tocsc()
        else:
            raise ValueError(f"unknown operator form {form!r}")
        self._lu = {}

    # -- linear algebra ---------------------------------------------------
    def _solver(self, coef0: float, dt: float):
        key = (coef0, dt)
        if key not in self._lu:
            n = self.x.size - 2
            self._lu[key] = splu((coef0 * sp.identity(n, format="csc") - dt * self.L).tocsc())
        return self._lu[key]

    def nonlinear_term(self, p):
        if self.q is None:
            raise ValueError("the pure-heat model has no nonlinearity")
        return remainder_N(self.q, self.omega * p, self.ctx.nl) * p

    def check_guard(self, p):
        if self.q is None:
            return
        u = self.q + self.omega * p
        if u.min() < -0.1 or u.max() > 1.1:
            raise GuardBandError(f"u left [-0.1, 1.1]: range [{u.min():.4g}, {u.max():.4g}]")

    def state(self, p0, t: float = 0.0) -> "SimState":
        p = np.array(p0(self.x) if callable(p0) else p0, dtype=float)
        p[0] = p[-1] = 0.0
        return SimState(self.x, p, float(t), [], sim=self)

    def weighted_sup(self, p) -> float:
        return float(np.max(np.abs(p) / (1.0 + np.abs(self.x))))


@dataclass
class SimState:
    """Grid, field and diagnostics.

    ``history`` holds rows ``(t, (1+t)^{3/2} sup |p|/(1+|x|), sup |p|/(1+|x|))``.
    ``p_prev`` and ``n_prev`` carry the previous level for the two-step scheme.
    """

    grid: np.ndarray
    p: np.ndarray
    t: float
    history: list = field(default_factory=list)
    sim: Simulator | None = field(default=None, repr=False)
    p_prev: np.ndarray | None = field(default=None, repr=False)
    n_prev: np.ndarray | None = field(default=None, repr=False)

    def record(self):
        ws = self.sim.weighted_sup(self.p)
        self.history.append((self.t, (1.0 + self.t) ** 1.5 * ws, ws))

    def boundary_max(self, band: float = 10.0) -> float:
        near = (self.grid < self.grid[0] + band) | (self.grid > self.grid[-1] - band)
        return float(np.max(np.abs(self.p[near])))


def _advance(state: SimState, dt: float | None, nonlinear: bool) -> SimState:
    sim = state.sim
    dt = sim.dt if dt is None else float(dt)
    p = state.p
    n_now = sim.nonlinear_term(p)[1:-1] if nonlinear else None
    if state.p_prev is None:
        rhs = p[1:-1] + (dt * n_now if nonlinear else 0.0)
        new = sim._solver(1.0, dt).solve(rhs)
    else:
        rhs = 4.0 * p[1:-1] - state.p_prev[1:-1]
        if nonlinear:
            rhs = rhs + 2.0 * dt * (2.0 * n_now - state.n_prev)
        new = sim._solver(3.0, 2.0 * dt).solve(rhs)
    out = np.zeros_like(p)
    out[1:-1] = new
    old_sup = np.max(np.abs(p))
    if not np.all(np.isfinite(out)) or (old_sup > 0 and np.max(np.abs(out)) > 10.0 * old_sup):
        raise BlowUpError(f"sup norm jumped at t={state.t + dt:.4g}")
    if nonlinear:
        sim.check_guard(out)
    return SimState(state.grid, out, state.t + dt, state.history, sim, p, n_now)


def step_linear(state: SimState, dt: float | None = None) -> SimState:
    """One step of ``p_t = L p``."""
    return _advance(state, dt, nonlinear=False)


def step_nonlinear(state: SimState, dt: float | None = None) -> SimState:
    """One step of ``p_t = L p + N(q*, w p) p``."""
    return _advance(state, dt, nonlinear=True)


def evolve(state: SimState, T: float, *, nonlinear: bool = True, snapshots=(), record: bool = False):
    """Step to time ``T``; returns the final state and ``{tau: p}`` at the requested times."""
    sim = state.sim
    stepper = step_nonlinear if nonlinear else step_linear
    n = round((T - state.t) / sim.dt)
    want = {round((s - state.t) / sim.dt): s for s in snapshots}
    snaps = {}
    if 0 in want:
        snaps[want[0]] = state.p.copy()
    if record:
        state.record()
    for k in range(1, n + 1):
        state = stepper(state)
        if record:
            state.record()
        if k in want:
            snaps[want[k]] = state.p.copy()
    return state, snaps


# ---------------------------------------------------------------------------
# decay experiment
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DecayReport:
    """Result of a nonlinear run.

    Attributes
    ----------
    theta_series : ndarray, shape (n, 2)
        ``(t, Theta(t))``, nondecreasing in the second column.
    slope : float
        Fitted rate of ``sup |p|/(1+|x|)`` against ``1 + t`` on ``[t_fit, T]``; NaN if ``T < t_fit``.
    omega_const : float
        ``sup (1 + |x|) w(x)``.
    sup_series : ndarray, shape (n, 2)
        ``(t, sup |p|/(1+|x|))``.
    eps_data : float
        ``||p0||_inf + ||(1+|x|) p0||_1``.
    moment3 : float
        ``int (1+|y|)^3 w(y) dy``.
    boundary_max : float
        Largest ``|p|`` within 10 units of either end at the final time.
    guard_ok : bool
    chi_ratio : float
        Largest ``|N p| / (chi(R) w p^2)`` seen at the sample times.
    """

    theta_series: np.ndarray
    slope: float
    omega_const: float
    sup_series: np.ndarray
    eps_data: float
    moment3: float
    boundary_max: float
    guard_ok: bool
    chi_ratio: float

    def theta_at(self, t: float) -> float:
        i = np.searchsorted(self.theta_series[:, 0], t - 1e-9)
        return float(self.theta_series[min(i, len(self.theta_series) - 1), 1])


def _fit_rate(ts, sups, t_fit):
    sel = ts >= t_fit
    if sel.sum() < 2:
        return float("nan")  # run ended before the fit window
    return float(np.polyfit(np.log1p(ts[sel]), np.log(sups[sel]), 1)[0])


def run_decay_experiment(p0, T_final: float = 200.0, dt: float = 0.01, sample_times=None, *,
                         ctx: ModeContext | None = None, h: float = 0.02, t_fit: float = 10.0,
                         sim: Simulator | None = None) -> DecayReport:
    """Evolve the nonlinear weighted equation and measure ``Theta`` and the decay rate.

    ``p0`` is a callable or an array on the simulator grid; ``sample_times``
    (default every 0.5) select where the chi surrogate is checked.
    """
    if sim is None:
        if ctx is None:
            from .modes import default_context

            ctx = default_context()
        sim = Simulator(ctx, h=h, dt=dt)
    state = sim.state(p0)
    u0 = sim.q + sim.omega * state.p
    if u0.min() < -1e-12 or u0.max() > 1 + 1e-12:
        raise GuardBandError("initial u = q* + w p0 must lie in [0, 1]")
    x = sim.x
    eps = float(np.max(np.abs(state.p)) + np.trapezoid((1 + np.abs(x)) * np.abs(state.p), x))
    moment3 = float(np.trapezoid((1 + np.abs(x)) ** 3 * sim.omega, x))
    sample_times = np.arange(0.0, T_final + 1e-9, 0.5) if sample_times is None else np.asarray(sample_times)
    sample_steps = {round(s / sim.dt) for s in sample_times}
    chi_ratio = 0.0
    n = round(T_final / sim.dt)
    state.record()
    guard_ok = True
    for k in range(1, n + 1):
        try:
            state = step_nonlinear(state)
        except GuardBandError:
            guard_ok = False
            raise
        state.record()
        if k in sample_steps:
            wp = sim.omega * state.p
            R = float(np.max(np.abs(wp)))
            rhs = chi(R, sim.ctx.nl) * sim.omega * state.p**2
            nz = rhs > 0
            if nz.any():
                lhs = np.abs(sim.nonlinear_term(state.p))[nz]
                chi_ratio = max(chi_ratio, float(np.max(lhs / rhs[nz])))
    hist = np.array(state.history)
    theta = np.maximum.accumulate(hist[:, 1])
    slope = _fit_rate(hist[:, 0], hist[:, 2], t_fit)
    return DecayReport(
        theta_series=np.column_stack([hist[:, 0], theta]),
        slope=slope,
        omega_const=sim.ctx.weight.sup_weighted(),
        sup_series=hist[:, [0, 2]],
        eps_data=eps,
        moment3=moment3,
        boundary_max=state.boundary_max(),
        guard_ok=guard_ok,
        chi_ratio=chi_ratio,
    )


# ---------------------------------------------------------------------------
# full front equation
# ---------------------------------------------------------------------------


def run_full_u(sim: Simulator, p0, T: float):
    """Evolve ``u_t = u_xx + c* u_x + f(u)`` from ``u0 = q* + w p0`` and return ``(u - q*)/w``.

    The discrete residual of the sampled ``q*`` is subtracted so that ``q*`` is
    an exact steady state of the scheme; otherwise that residual, divided by
    ``w``, would dominate the reconstructed ``p`` in the right tail.  The
    linearisation ``f'(q*)`` is treated implicitly and the rest of ``f``
    explicitly, the same split as the weighted stepper.
    """
    ctx = sim.ctx
    nl, c = ctx.nl, ctx.model.cstar
    x, h, dt = sim.x, sim.h, sim.dt
    q = sim.q
    xi = x[1:-1]
    f1q = nl.f1(q[1:-1])
    A = _tridiag(np.ones_like(xi), np.full_like(xi, c), f1q, h)
    # boundary rows: u is pinned to q* at both ends
    bc = np.zeros_like(xi)
    bc[0] = (1 / h**2 - c / (2 * h)) * q[0]
    bc[-1] = (1 / h**2 + c / (2 * h)) * q[-1]
    resid = A @ q[1:-1] + bc + nl.f(q[1:-1]) - f1q * q[1:-1]

    def explicit(u):
        return nl.f(u) - f1q * u - resid

    n = xi.size
    I = sp.identity(n, format="csc")
    lu1 = splu((I - dt * A).tocsc())
    lu2 = splu((3 * I - 2 * dt * A).tocsc())
    u = q[1:-1] + sim.omega[1:-1] * (p0(xi) if callable(p0) else np.asarray(p0)[1:-1])
    e_now = explicit(u)
    u_prev, e_prev = u, e_now
    u = lu1.solve(u + dt * (e_now + bc))
    for _ in range(1, round(T / dt)):
        e_now = explicit(u)
        rhs = 4 * u - u_prev + 2 * dt * (2 * e_now - e_prev + bc)
        u_prev, e_prev = u, e_now
        u = lu2.solve(rhs)
    out = np.zeros_like(x)
    out[1:-1] = (u - q[1:-1]) / sim.omega[1:-1]
    return out, np.concatenate([[q[0]], u, [q[-1]]])


# ---------------------------------------------------------------------------
# oracles
# ---------------------------------------------------------------------------


def delta_approximant(y0: float, sigma: float):
    """Unit-mass Gaussian of width ``sigma`` centred at ``y0``."""
    return lambda x: np.exp(-((x - y0) ** 2) / (2 * sigma**2)) / (np.sqrt(2 * np.pi) * sigma)


def _simpson_weights(n: int, d: float):
    if n % 2:
        raise ValueError("Simpson's rule needs an even number of intervals")
    w = np.ones(n + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * d / 3.0


def _compact(x, values, step, tol=1e-14):
    """Subsample ``values`` to spacing ``step`` and trim where it is negligible."""
    stride = max(1, round(step / (x[1] - x[0])))
    xs, vs = x[::stride], values[::stride]
    big = np.abs(vs) > tol * max(np.max(np.abs(vs)), 1e-300)
    if not big.any():
        return xs[:1], vs[:1] * 0
    i0, i1 = np.flatnonzero(big)[[0, -1]]
    return xs[i0: i1 + 1], vs[i0: i1 + 1]


def _trap(ygrid, vals):
    if ygrid.size < 2:
        return np.zeros_like(vals)
    w = np.full(ygrid.size, ygrid[1] - ygrid[0])
    w[0] *= 0.5
    w[-1] *= 0.5
    return w * vals


def duhamel_residual(snapshots: dict, sim: Simulator, t: float, xs, *, nonlinear: bool = True,
                     dtau: float = 0.25, dy: float = 0.05, dy_n: float = 0.1, tol_n: float = 1e-9,
                     params: ContourParams | None = None) -> float:
    """Relative mismatch of the integral equation at time ``t`` and points ``xs``.

    ``snapshots`` maps ``tau`` to ``p(tau, .)`` on the simulator grid for
    ``tau = 0, dtau, ..., t``.  The time integral uses Simpson's rule; the
    endpoint ``tau = t`` has ``G(0) = delta`` and contributes ``N p(t, x)``.
    Space integrals use the trapezoidal rule on a grid of step ``dy``; the
    nonlinear source, a small correction, uses step ``dy_n`` and is cut where
    it falls below ``tol_n`` times its maximum.
    """
    xs = np.atleast_1d(np.asarray(xs, float))
    nt = round(t / dtau)
    if not np.isclose(nt * dtau, t):
        raise ValueError("t must be a multiple of dtau")
    taus = dtau * np.arange(nt + 1)
    for tau in taus:
        if not any(np.isclose(tau, k) for k in snapshots):
            raise KeyError(f"missing snapshot at tau={tau}")
    snap = {float(tau): snapshots[min(snapshots, key=lambda k: abs(k - tau))] for tau in taus}
    ix = np.array([np.argmin(np.abs(sim.x - x)) for x in xs])
    lhs = snap[taus[-1]][ix]
    yg, pv = _compact(sim.x, snap[0.0], dy)
    rhs = green_time_matrix(t, xs, yg, sim.ctx, params=params, skip_negligible=True) @ _trap(yg, pv)
    if nonlinear:
        w = _simpson_weights(nt, dtau)
        inner = np.zeros(xs.size)
        for wk, tau in zip(w, taus):
            F = sim.nonlinear_term(snap[tau])
            if tau == taus[-1]:
                inner += wk * F[ix]
                continue
            yg, fv = _compact(sim.x, F, dy_n, tol_n)
            inner += wk * (green_time_matrix(t - tau, xs, yg, sim.ctx, params=params, skip_negligible=True) @ _trap(yg, fv))
        rhs = rhs + inner
    return float(np.max(np.abs(lhs - rhs)) / np.max(np.abs(lhs)))


def convolution_inequality_check(ts=(1.0, 10.0, 100.0, 1000.0)) -> dict:
    """``(1+t)^{3/2} int_0^t (1+t-tau)^{-3/2} (1+tau)^{-3} dtau`` for each ``t``."""
    vals = {}
    for t in ts:
        if t == 0:
            vals[float(t)] = 0.0
            continue
        integral, _ = quad(lambda s: (1 + t - s) ** -1.5 * (1 + s) ** -3.0, 0.0, t,
                           epsabs=1e-13, epsrel=1e-12, limit=200)
        vals[float(t)] = integral * (1 + t) ** 1.5
    return {"values": vals, "sup": max(vals.values())}
