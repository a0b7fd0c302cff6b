"""Reaction term, model constants, exponential weight and the weighted coefficients.

The weighted linearization about the critical front reads

    L p = p'' + zeta1(x) p' + zeta0(x) p,

    zeta1 = c* + 2 w'/w,
    zeta0 = f'(q*) + c* w'/w + w''/w,

where ``w`` is an exponential weight equal to ``exp(-g* x)`` for ``x >= 1`` and
``exp(beta x)`` for ``x <= -1``.  On ``[-1, 1]`` the log-weight is the unique
degree-6 polynomial that is C^2 at both junctions and vanishes at the origin.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "Nonlinearity",
    "NONLINEARITIES",
    "get_nonlinearity",
    "ModelParams",
    "make_model",
    "Weight",
    "make_weight",
    "zeta1",
    "zeta0",
    "mu_pm",
    "gamma_minus_distance",
    "BranchCutError",
    "read_config",
    "CONFIG_KEYS",
]


class BranchCutError(ValueError):
    """Raised when a spectral parameter sits on a square-root branch cut."""


# ---------------------------------------------------------------------------
# nonlinearities
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Nonlinearity:
    """Closed-form reaction term with its first two derivatives."""

    name: str
    f: Callable
    f1: Callable
    f2: Callable

    def check(self, n: int = 2001) -> None:
        """Raise ``ValueError`` unless the KPP hypotheses hold on a sample grid."""
        if abs(self.f(0.0)) > 1e-14 or abs(self.f(1.0)) > 1e-14:
            raise ValueError(f"{self.name}: f(0) and f(1) must vanish")
        if not self.f1(0.0) > 0 or not self.f1(1.0) < 0:
            raise ValueError(f"{self.name}: need f'(0) > 0 > f'(1)")
        u = np.linspace(0.0, 1.0, n)[1:-1]
        if np.any(self.f2(u) >= 0):
            raise ValueError(f"{self.name}: f'' must be negative on (0, 1)")


NONLINEARITIES: dict[str, Nonlinearity] = {
    "kpp": Nonlinearity(
        "kpp",
        f=lambda u: u * (1.0 - u),
        f1=lambda u: 1.0 - 2.0 * u,
        f2=lambda u: -2.0 * np.ones_like(np.asarray(u, dtype=float)),
    ),
    # u - u^3: f'(0) = 1, f'(1) = -2
    "cubic": Nonlinearity(
        "cubic",
        f=lambda u: u * (1.0 - u * u),
        f1=lambda u: 1.0 - 3.0 * u * u,
        f2=lambda u: -6.0 * np.asarray(u, dtype=float),
    ),
}


def get_nonlinearity(name: str) -> Nonlinearity:
    try:
        return NONLINEARITIES[name]
    except KeyError:
        raise ValueError(
            f"unknown nonlinearity {name!r}; choose from {sorted(NONLINEARITIES)}"
        ) from None


# ---------------------------------------------------------------------------
# constants
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModelParams:
    """Derived constants of the critical front problem.

    Attributes
    ----------
    f1at0, f1at1 : float
        ``f'(0) > 0`` and ``f'(1) < 0``.
    cstar : float
        Minimal wave speed ``2 sqrt(f'(0))``.
    gstar : float
        Front decay rate ``cstar / 2``.
    beta : float
        Rate of the weight on the left, ``0 < beta < betaMax``.
    alpha : float
        Decay rate used in the mode remainder estimates, ``0 < alpha < gstar``.
    betaMax : float
        ``-cstar/2 + sqrt(cstar^2/4 - f'(1))``.
    """

    f1at0: float
    f1at1: float
    beta: float
    alpha: float
    cstar: float
    gstar: float
    betaMax: float

    @property
    def z1_left(self) -> float:
        """Limit of ``zeta1`` at minus infinity, ``c* + 2 beta``."""
        return self.cstar + 2.0 * self.beta

    @property
    def z0_left(self) -> float:
        """Limit of ``zeta0`` at minus infinity, ``f'(1) + c* beta + beta^2``."""
        return self.f1at1 + self.cstar * self.beta + self.beta**2


def make_model(f1at0: float, f1at1: float, beta: float = 0.2, alpha: float = 0.8) -> ModelParams:
    if not f1at0 > 0:
        raise ValueError("f'(0) must be positive")
    if not f1at1 < 0:
        raise ValueError("f'(1) must be negative")
    cstar = 2.0 * np.sqrt(f1at0)
    gstar = cstar / 2.0
    beta_max = -cstar / 2.0 + np.sqrt(cstar**2 / 4.0 - f1at1)
    if not 0.0 < beta < beta_max:
        raise ValueError(f"beta={beta} outside (0, {beta_max:.6g})")
    if not 0.0 < alpha < gstar:
        raise ValueError(f"alpha={alpha} outside (0, {gstar:.6g})")
    return ModelParams(
        f1at0=float(f1at0),
        f1at1=float(f1at1),
        beta=float(beta),
        alpha=float(alpha),
        cstar=float(cstar),
        gstar=float(gstar),
        betaMax=float(beta_max),
    )


# ---------------------------------------------------------------------------
# weight
# ---------------------------------------------------------------------------


def _bridge_coefficients(beta: float, gstar: float) -> np.ndarray:
    """Coefficients (increasing powers) of the degree-6 log-weight bridge."""
    n = 7
    rows, rhs = [], []

    def row(x, deriv):
        r = np.zeros(n)
        for k in range(deriv, n):
            r[k] = np.prod(np.arange(k - deriv + 1, k + 1)) * x ** (k - deriv)
        return r

    for x, d, v in [
        (-1.0, 0, -beta),
        (-1.0, 1, beta),
        (-1.0, 2, 0.0),
        (1.0, 0, -gstar),
        (1.0, 1, -gstar),
        (1.0, 2, 0.0),
        (0.0, 0, 0.0),
    ]:
        rows.append(row(x, d))
        rhs.append(v)
    return np.linalg.solve(np.array(rows), np.array(rhs))


@dataclass(frozen=True)
class Weight:
    """Exponential weight ``w = exp(p)`` with a polynomial bridge on ``[-1, 1]``."""

    beta: float
    gstar: float
    coef: np.ndarray = field(repr=False)

    def _piecewise(self, x, left, right, poly):
        x = np.asarray(x, dtype=float)
        out = np.where(x >= 1.0, right(x), np.where(x <= -1.0, left(x), poly(np.clip(x, -1, 1))))
        return out if out.ndim else float(out)

    def logw(self, x):
        P = np.polynomial.Polynomial(self.coef)
        return self._piecewise(x, lambda s: self.beta * s, lambda s: -self.gstar * s, P)

    def dlogw(self, x):
        P = np.polynomial.Polynomial(self.coef).deriv()
        return self._piecewise(
            x, lambda s: self.beta + 0 * s, lambda s: -self.gstar + 0 * s, P
        )

    def d2logw(self, x):
        P = np.polynomial.Polynomial(self.coef).deriv(2)
        return self._piecewise(x, lambda s: 0 * s, lambda s: 0 * s, P)

    def omega(self, x):
        return np.exp(self.logw(x))

    def ratio1(self, x):
        """``w'/w``."""
        return self.dlogw(x)

    def ratio2(self, x):
        """``w''/w = p'' + p'^2``."""
        d = self.dlogw(x)
        return self.d2logw(x) + d * d

    def sup_weighted(self, n: int = 200001, span: float = 80.0) -> float:
        """``sup (1 + |x|) w(x)``, sampled."""
        x = np.linspace(-span, span, n)
        return float(np.max((1.0 + np.abs(x)) * self.omega(x)))


def make_weight(m: ModelParams) -> Weight:
    return Weight(beta=m.beta, gstar=m.gstar, coef=_bridge_coefficients(m.beta, m.gstar))


def zeta1(x, w: Weight, m: ModelParams):
    """Advection coefficient ``c* + 2 w'/w``."""
    return m.cstar + 2.0 * w.dlogw(x)


def zeta0(x, q, w: Weight, m: ModelParams, nl: Nonlinearity):
    """Potential ``f'(q*) + c* w'/w + w''/w``.

    ``q`` is either a callable returning the front at ``x`` or an object with a
    ``q_at`` method (a :class:`~kppstab.front.FrontProfile`).
    """
    qfun = q.q_at if hasattr(q, "q_at") else q
    x = np.asarray(x, dtype=float)
    d = w.dlogw(x)
    # for x >= 1 the weight terms cancel f'(0) exactly; use the difference form
    right = nl.f1(qfun(x)) - m.f1at0
    general = nl.f1(qfun(x)) + m.cstar * d + w.d2logw(x) + d * d
    out = np.where(x >= 1.0, right, general)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# spectral helpers
# ---------------------------------------------------------------------------


def _left_discriminant(lam, m: ModelParams):
    return m.z1_left**2 - 4.0 * m.z0_left + 4.0 * np.asarray(lam, dtype=complex)


def mu_pm(lam, m: ModelParams, sign: int):
    """Spatial rates of the left asymptotic problem.

    ``mu^{+/-} = -(c*+2b)/2 +/- sqrt((c*+2b)^2 - 4(f'(1)+c* b+b^2) + 4 lam)/2``
    with the principal square root.  Raises :class:`BranchCutError` when the
    radicand is real and non-positive.
    """
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    disc = _left_discriminant(lam, m)
    bad = (np.abs(disc.imag) <= 1e-300) & (disc.real <= 0.0)
    if np.any(bad):
        raise BranchCutError(f"lambda={lam} lies on the branch cut of mu")
    out = -m.z1_left / 2.0 + sign * 0.5 * np.sqrt(disc)
    return out if np.ndim(out) else complex(out)


def gamma_minus_distance(lam, m: ModelParams):
    """Signed horizontal distance from ``lam`` to the parabola Gamma_-.

    Gamma_- = { -l^2 + (c*+2b) i l + f'(1) + c* b + b^2 }.  Positive values lie
    strictly to its right.
    """
    lam = np.asarray(lam, dtype=complex)
    ell = lam.imag / m.z1_left
    out = lam.real - (m.z0_left - ell**2)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# configuration files
# ---------------------------------------------------------------------------

CONFIG_KEYS = {
    "nonlinearity": str,
    "beta": float,
    "alpha": float,
    "domain_left": float,
    "domain_right": float,
    "grid_step": float,
}


def read_config(path) -> dict:
    """Parse a ``key = value`` file.  Blank lines and ``#`` comments are skipped.

    Unknown keys raise ``KeyError`` naming the key.
    """
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in CONFIG_KEYS:
                raise KeyError(key)
            out[key] = CONFIG_KEYS[key](value)
    return out
