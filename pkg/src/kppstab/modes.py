"""Decaying and growing solutions of ``L p = lam p`` with their exponential rates factored out.

Every mode is stored as an envelope: ``P(x) = e^{E(x)} Z(x)`` with
``P = (p, p')`` and ``E`` piecewise linear with ``E(0) = 0``.  The slope of ``E``
is the *home* rate on the half-line where the mode is normalised and the
dominant rate of the continued solution on the other half-line, so ``Z``
stays of order one everywhere.

=========  ============  ===========  ============================
kind       x >= 0 rate   x < 0 rate   normalisation
=========  ============  ===========  ============================
phi_plus   -sqrt(lam)    mu^-         Z = (1, -sqrt(lam)) at X_R
psi_plus   +sqrt(lam)    mu^-         Z = (1, +sqrt(lam)) at X_R
phi_minus  +sqrt(lam)    mu^+         Z = (1, mu^+) at X_L
psi_minus  +sqrt(lam)    mu^-         Z = (1, mu^-) at 0, rescaled so Z_1(X_L) = 1
=========  ============  ===========  ============================

Every sweep runs in the direction in which the unwanted solution decays
relative to the wanted one, except ``psi_plus`` which is only defined up to a
multiple of ``phi_plus`` anyway.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import _magnus
from .front import FrontProfile, solve_front
from .model import (
    BranchCutError,
    ModelParams,
    Nonlinearity,
    Weight,
    gamma_minus_distance,
    get_nonlinearity,
    make_model,
    make_weight,
    zeta0,
    zeta1,
)

__all__ = [
    "Region",
    "SpectralPoint",
    "spectral_point",
    "ModeContext",
    "default_context",
    "ModeSolution",
    "KINDS",
    "assemble_A",
    "mode_envelopes",
    "solve_mode",
    "envelope_residual",
    "cancellation_Lambda",
    "M_SMALL",
    "M_LARGE",
    "DELTA0",
    "DELTA1",
]

M_SMALL = 0.5
M_LARGE = 10.0
DELTA0 = 0.05
DELTA1 = float(np.tan(np.pi / 12))

KINDS = ("phi_plus", "psi_plus", "phi_minus", "psi_minus")


class Region(str, Enum):
    small = "small"
    mid = "mid"
    large = "large"


def in_omega_delta(lam, delta0=DELTA0, delta1=DELTA1):
    """True where ``Re lam >= -delta0 - delta1 |Im lam|``."""
    lam = np.asarray(lam, dtype=complex)
    return lam.real >= -delta0 - delta1 * np.abs(lam.imag)


# ---------------------------------------------------------------------------
# context: sampled coefficients
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModeContext:
    """Coefficients ``zeta0, zeta1`` sampled for the Magnus sweeps.

    Attributes
    ----------
    grid : ndarray
        Uniform nodes on ``[X_L, X_R]``; ``grid[j0] == 0``.
    g0, g1 : ndarray, shape (N-1, 2)
        ``zeta0`` and ``zeta1`` at the two Gauss points of each interval.
    z1_left, z0_left : float
        Limits at minus infinity (plus infinity limits are zero).
    pure_heat : bool
        Synthetic constant-coefficient model ``zeta0 = zeta1 = 0``.
    """

    grid: np.ndarray
    h: float
    j0: int
    g0: np.ndarray = field(repr=False)
    g1: np.ndarray = field(repr=False)
    z1_left: float
    z0_left: float
    pure_heat: bool = False
    model: ModelParams | None = field(default=None, repr=False)
    weight: Weight | None = field(default=None, repr=False)
    front: FrontProfile | None = field(default=None, repr=False)
    nl: Nonlinearity | None = field(default=None, repr=False)

    @property
    def X_L(self) -> float:
        return float(self.grid[0])

    @property
    def X_R(self) -> float:
        return float(self.grid[-1])

    # -- coefficients -----------------------------------------------------
    def zeta(self, x):
        """``(zeta0(x), zeta1(x))`` with exact limits outside the grid."""
        x = np.asarray(x, dtype=float)
        if self.pure_heat:
            return np.zeros_like(x), np.zeros_like(x)
        z0 = zeta0(x, self.front, self.weight, self.model, self.nl)
        z1 = zeta1(x, self.weight, self.model)
        z0 = np.where(x < self.X_L, self.z0_left, np.where(x > self.X_R, 0.0, z0))
        return np.asarray(z0, dtype=float), np.asarray(z1, dtype=float)

    def mu(self, lam, sign: int):
        """Left spatial rates; for the pure-heat model ``mu^{+/-} = +/- sqrt(lam)``."""
        lam = np.asarray(lam, dtype=complex)
        disc = self.z1_left**2 - 4.0 * self.z0_left + 4.0 * lam
        if np.any((disc.imag == 0.0) & (disc.real < 0.0)):
            raise BranchCutError("lambda on the branch cut of mu")
        return -self.z1_left / 2.0 + sign * 0.5 * np.sqrt(disc)

    # -- constructors -----------------------------------------------------
    @classmethod
    def from_front(
        cls,
        front: FrontProfile,
        w: Weight,
        m: ModelParams,
        nl: Nonlinearity,
        X_L: float = -60.0,
        X_R: float = 40.0,
        h: float = 0.02,
    ) -> "ModeContext":
        grid, j0 = _grid(X_L, X_R, h)
        self = cls(
            grid=grid,
            h=h,
            j0=j0,
            g0=np.empty((0, 2)),
            g1=np.empty((0, 2)),
            z1_left=m.z1_left,
            z0_left=m.z0_left,
            model=m,
            weight=w,
            front=front,
            nl=nl,
        )
        xg = _gauss_points(grid)
        z0, z1 = self.zeta(xg)
        object.__setattr__(self, "g0", np.ascontiguousarray(z0))
        object.__setattr__(self, "g1", np.ascontiguousarray(z1))
        return self

    @classmethod
    def pure_heat_model(cls, X_L: float = -60.0, X_R: float = 40.0, h: float = 0.02) -> "ModeContext":
        grid, j0 = _grid(X_L, X_R, h)
        zeros = np.zeros((grid.size - 1, 2))
        return cls(grid=grid, h=h, j0=j0, g0=zeros, g1=zeros.copy(), z1_left=0.0, z0_left=0.0, pure_heat=True)


def _grid(X_L, X_R, h):
    n_l = round(-X_L / h)
    n_r = round(X_R / h)
    if not (np.isclose(n_l * h, -X_L) and np.isclose(n_r * h, X_R)) or n_l < 1 or n_r < 1:
        raise ValueError("X_L < 0 < X_R must be integer multiples of h")
    grid = h * np.arange(-n_l, n_r + 1, dtype=float)
    grid[n_l] = 0.0
    return grid, n_l


def _gauss_points(grid):
    h = grid[1:] - grid[:-1]
    return np.stack([grid[:-1] + _magnus.GAUSS[0] * h, grid[:-1] + _magnus.GAUSS[1] * h], axis=1)


_DEFAULT_CACHE: dict = {}


def default_context(nonlinearity: str = "kpp", beta: float = 0.2, alpha: float = 0.8, **kw) -> ModeContext:
    """Context for the default model, cached per argument set."""
    key = (nonlinearity, beta, alpha, tuple(sorted(kw.items())))
    if key not in _DEFAULT_CACHE:
        nl = get_nonlinearity(nonlinearity)
        m = make_model(float(nl.f1(0.0)), float(nl.f1(1.0)), beta, alpha)
        front = solve_front(nl, m)
        _DEFAULT_CACHE[key] = ModeContext.from_front(front, make_weight(m), m, nl, **kw)
    return _DEFAULT_CACHE[key]


# ---------------------------------------------------------------------------
# spectral points
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpectralPoint:
    lam: complex
    sqrt_lam: complex
    region: Region

    def __complex__(self):
        return self.lam


def spectral_point(lam, m: ModelParams | None = None) -> SpectralPoint:
    """Principal square root and region tag of ``lam``.

    Raises ``BranchCutError`` on the open negative real axis.
    """
    if isinstance(lam, SpectralPoint):
        return lam
    lam = complex(lam)
    if lam.imag == 0.0 and lam.real < 0.0:
        raise BranchCutError(f"lambda={lam} lies on the negative real axis")
    s = np.sqrt(lam)
    right_of_gamma = True if m is None else gamma_minus_distance(lam, m) > 0
    if abs(lam) <= M_SMALL and right_of_gamma:
        region = Region.small
    elif abs(lam) >= M_LARGE and in_omega_delta(lam):
        region = Region.large
    else:
        region = Region.mid
    return SpectralPoint(lam=lam, sqrt_lam=complex(s), region=region)


def assemble_A(x, lam, ctx: ModeContext) -> np.ndarray:
    """``[[0, 1], [lam - zeta0(x), -zeta1(x)]]``; shape ``(..., 2, 2)``."""
    z0, z1 = ctx.zeta(x)
    lam = complex(lam)
    A = np.zeros(np.shape(z0) + (2, 2), dtype=complex)
    A[..., 0, 1] = 1.0
    A[..., 1, 0] = lam - z0
    A[..., 1, 1] = -z1
    return A


# ---------------------------------------------------------------------------
# batched envelopes
# ---------------------------------------------------------------------------


def _rates(kind, lam, ctx: ModeContext):
    s = np.sqrt(lam)
    if kind == "phi_plus":
        return -s, ctx.mu(lam, -1)
    if kind == "psi_plus":
        return s, ctx.mu(lam, -1)
    if kind == "phi_minus":
        return s, ctx.mu(lam, +1)
    if kind == "psi_minus":
        return s, ctx.mu(lam, -1)
    raise ValueError(f"unknown mode kind {kind!r}; choose from {KINDS}")


def _grid_envelopes(kind, lam, ctx: ModeContext, span=None):
    """Envelopes at the nodes, shape (K, N, 2).

    ``span = (lo, hi)`` limits the nodes that must be filled; sweeps stop
    once they have covered it (other entries are left undefined).
    """
    r_right, r_left = _rates(kind, lam, ctx)
    K, N = lam.size, ctx.grid.size
    lo, hi = (0, N - 1) if span is None else span
    out = np.empty((K, N, 2), dtype=complex)
    if ctx.pure_heat:
        # constant coefficients: Z is the eigenvector everywhere
        out[:, :, 0] = 1.0
        r = np.where(ctx.grid[None, :] < 0, r_left[:, None], r_right[:, None])
        out[:, :, 1] = r
        return out
    args = (ctx.g0, ctx.g1, ctx.h, lam, r_left, r_right, ctx.j0)
    if kind in ("phi_plus", "psi_plus"):
        z = np.stack([np.ones(K, complex), r_right], axis=1)
        _magnus.sweep(*args, z, N - 1, min(lo, N - 1), out)
    elif kind == "phi_minus":
        z = np.stack([np.ones(K, complex), r_left], axis=1)
        _magnus.sweep(*args, z, 0, max(hi, 0), out)
    else:
        # normalised at X_L, so the leftward sweep always runs to the end
        z = np.stack([np.ones(K, complex), r_left], axis=1)
        _magnus.sweep(*args, z, ctx.j0, 0, out)
        scale = 1.0 / out[:, 0, 0]
        out[:, : ctx.j0 + 1, :] *= scale[:, None, None]
        _magnus.sweep(*args, np.ascontiguousarray(out[:, ctx.j0, :]), ctx.j0, max(hi, ctx.j0), out)
    return out


def _backward_at(kind, x, ctx):
    """True where the value at ``x`` is reached by a leftward sweep."""
    if kind in ("phi_plus", "psi_plus"):
        return np.ones(x.shape, bool)
    if kind == "phi_minus":
        return np.zeros(x.shape, bool)
    return x < 0.0


def mode_envelopes(kind: str, lam, x, ctx: ModeContext):
    """Exponent ``E`` and envelope ``Z`` of a mode at arbitrary points.

    Parameters
    ----------
    kind : {"phi_plus", "psi_plus", "phi_minus", "psi_minus"}
    lam : complex or array_like, shape (K,)
    x : array_like, shape (Q,)

    Returns
    -------
    E : ndarray, shape (K, Q)
    Z : ndarray, shape (K, Q, 2)
        The mode and its derivative are ``e^{E} Z[..., 0]`` and ``e^{E} Z[..., 1]``.
    """
    lam = np.atleast_1d(np.asarray(lam, dtype=complex))
    x = np.atleast_1d(np.asarray(x, dtype=float))
    r_right, r_left = _rates(kind, lam, ctx)
    pos = (x - ctx.grid[0]) / ctx.h
    span = (int(np.clip(np.floor(pos.min()) - 1, 0, ctx.grid.size - 1)),
            int(np.clip(np.ceil(pos.max()) + 1, 0, ctx.grid.size - 1)))
    nodes = _grid_envelopes(kind, lam, ctx, span)
    return _interpolate(kind, lam, x, nodes, r_left, r_right, ctx)


def _interpolate(kind, lam, x, nodes, r_left, r_right, ctx: ModeContext):
    grid, h, N = ctx.grid, ctx.h, ctx.grid.size
    E = np.where(x[None, :] < 0, r_left[:, None] * x[None, :], r_right[:, None] * x[None, :])
    if ctx.pure_heat:
        Z = np.empty(E.shape + (2,), complex)
        Z[..., 0] = 1.0
        Z[..., 1] = np.where(x[None, :] < 0, r_left[:, None], r_right[:, None])
        return E, Z
    back = _backward_at(kind, x, ctx)
    pos = (x - grid[0]) / h
    # upstream node: right neighbour for leftward sweeps, left neighbour otherwise
    idx = np.where(back, np.ceil(pos - 1e-9), np.floor(pos + 1e-9)).astype(int)
    idx = np.clip(idx, 0, N - 1)
    # never cross x = 0 inside a partial step
    if kind == "psi_minus":
        idx = np.where(back & (idx > ctx.j0), ctx.j0, idx)
        idx = np.where(~back & (idx < ctx.j0), ctx.j0, idx)
    xn = grid[idx]
    hh = x - xn
    # beyond the far normalisation end the envelope is the start vector
    frozen = ((kind in ("phi_plus", "psi_plus")) & (x > grid[-1])) | ((kind == "phi_minus") & (x < grid[0]))
    hh = np.where(frozen, 0.0, hh)
    g = _magnus.GAUSS
    pa, pb = xn + g[0] * hh, xn + g[1] * hh
    a0, b0 = ctx.zeta(pa)
    a1, b1 = ctx.zeta(pb)
    zn = np.ascontiguousarray(nodes[:, idx, :])
    mid = 0.5 * (xn + x)
    r = np.where(mid[None, :] < 0, r_left[:, None], r_right[:, None])
    r = np.ascontiguousarray(np.broadcast_to(r, zn.shape[:2]))
    Z = np.empty_like(zn)
    _magnus.partial_steps(
        zn, lam, r, np.ascontiguousarray(a0), np.ascontiguousarray(a1),
        np.ascontiguousarray(b0), np.ascontiguousarray(b1), np.ascontiguousarray(hh), Z,
    )
    return E, Z


# ---------------------------------------------------------------------------
# single-lambda interface
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModeSolution:
    """Envelope of one mode on the full sweep grid.

    ``rate`` is the home rate (``-sqrt(lam)``, ``+sqrt(lam)``, ``mu^+`` or
    ``mu^-``); ``far_rate`` is the slope of ``E`` on the other half-line.
    """

    kind: str
    lam: SpectralPoint
    rate: complex
    far_rate: complex
    grid: np.ndarray = field(repr=False)
    Z: np.ndarray = field(repr=False)

    @property
    def theta(self) -> np.ndarray:
        """Remainder ``Z_1 - 1``."""
        return self.Z[:, 0] - 1.0

    def exponent(self, x=None):
        x = self.grid if x is None else np.asarray(x, float)
        if self.kind in ("phi_minus", "psi_minus"):
            left, right = self.rate, self.far_rate
        else:
            left, right = self.far_rate, self.rate
        return np.where(x < 0, left * x, right * x)

    def values(self):
        """``(p, p')`` at the grid nodes.  May overflow far from the home side."""
        e = np.exp(self.exponent())
        return e * self.Z[:, 0], e * self.Z[:, 1]


def solve_mode(kind: str, lam, ctx: ModeContext, *, check: bool = True) -> ModeSolution:
    """Integrate one mode on the sweep grid of ``ctx``.

    Raises
    ------
    BranchCutError
        For ``lam`` on the negative real axis or the cut of ``mu``.
    FloatingPointError
        If the envelope blows up (wrong branch or forbidden region).
    """
    sp_ = spectral_point(lam, ctx.model)
    la = np.array([sp_.lam])
    r_right, r_left = _rates(kind, la, ctx)
    Z = _grid_envelopes(kind, la, ctx)[0]
    if check and (not np.all(np.isfinite(Z)) or np.max(np.abs(Z)) > 1e12):
        raise FloatingPointError(f"{kind} envelope blew up at lambda={sp_.lam}")
    home_left = kind in ("phi_minus", "psi_minus")
    rate = complex(r_left[0] if home_left else r_right[0])
    far = complex(r_right[0] if home_left else r_left[0])
    return ModeSolution(kind=kind, lam=sp_, rate=rate, far_rate=far, grid=ctx.grid, Z=Z)


def envelope_residual(sol: ModeSolution, ctx: ModeContext) -> float:
    """Max local defect: stored step versus two half steps from the same node."""
    x = ctx.grid
    lam = np.array([sol.lam.lam])
    r_right, r_left = _rates(sol.kind, lam, ctx)
    back = _backward_at(sol.kind, x[:-1] + 0.5 * ctx.h, ctx)
    # start node and target node of every step
    src = np.where(back, np.arange(1, x.size), np.arange(0, x.size - 1))
    dst = np.where(back, np.arange(0, x.size - 1), np.arange(1, x.size))
    z = sol.Z[src][None]
    # first half step
    xs = x[src]
    z = _half(z, lam, xs, 0.5 * (x[dst] - x[src]), r_left, r_right, ctx)
    z = _half(z, lam, xs + 0.5 * (x[dst] - x[src]), 0.5 * (x[dst] - x[src]), r_left, r_right, ctx)
    ref = z[0]
    scale = np.maximum(1.0, np.abs(sol.Z[dst]).max(axis=1))
    return float(np.max(np.abs(ref - sol.Z[dst]).max(axis=1) / scale))


def _half(z, lam, xs, hh, r_left, r_right, ctx):
    g = _magnus.GAUSS
    a0, b0 = ctx.zeta(xs + g[0] * hh)
    a1, b1 = ctx.zeta(xs + g[1] * hh)
    mid = xs + 0.5 * hh
    r = np.where(mid[None, :] < 0, r_left[:, None], r_right[:, None])
    out = np.empty_like(z)
    _magnus.partial_steps(
        np.ascontiguousarray(z), lam, np.ascontiguousarray(r), a0, a1, b0, b1, np.ascontiguousarray(hh), out
    )
    return out


# ---------------------------------------------------------------------------
# cancellation
# ---------------------------------------------------------------------------


def cancellation_Lambda(x, lam, ctx: ModeContext):
    """``(kappa_1^+ - theta_1^+) / sqrt(lam)`` at ``x >= 0``.

    ``kappa_1^+`` and ``theta_1^+`` are the remainders of ``psi^+`` and
    ``phi^+``.  Since ``psi^+`` is ``phi^+`` with ``sqrt(lam)`` replaced by its
    negative, the quotient is an even function of ``sqrt(lam)``.  Below
    ``|lam| = 1e-12`` the limit is obtained by Richardson extrapolation from
    two nearby points on the same ray.
    """
    x = np.atleast_1d(np.asarray(x, float))
    if np.any(x < 0):
        raise ValueError("cancellation_Lambda is defined for x >= 0")
    lam = complex(lam.lam if isinstance(lam, SpectralPoint) else lam)
    if abs(lam) < 1e-12:
        direction = lam / abs(lam) if lam != 0 else 1.0
        l1, l2 = 4e-6 * direction, 1e-6 * direction
        v1, v2 = cancellation_Lambda(x, l1, ctx), cancellation_Lambda(x, l2, ctx)
        # even in sqrt(lam): error ~ |lam|, ratio 4 between the two points
        return (4.0 * v2 - v1) / 3.0
    s = np.sqrt(lam)
    _, zp = mode_envelopes("phi_plus", lam, x, ctx)
    _, zk = mode_envelopes("psi_plus", lam, x, ctx)
    return (zk[0, :, 0] - zp[0, :, 0]) / s
