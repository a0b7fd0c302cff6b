"""Wronskians of the modes: the Evans function and the auxiliary determinants.

All determinants are formed from envelopes and the exponents are re-attached
at the end, ``det = e^{E_a + E_b} (Za_1 Zb_2 - Za_2 Zb_1)``.  Callers that need
to stay in range use :func:`pair_determinant` with ``log_form=True``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .front import derivative_mode
from .modes import ModeContext, SpectralPoint, mode_envelopes, spectral_point

__all__ = [
    "pair_determinant",
    "wronskian",
    "evans_function",
    "aux_determinants",
    "EvansSample",
    "evans_sample",
    "constancy_defect",
    "matched_scale",
    "winding_number",
    "rectangle_contour",
    "no_unstable_spectrum_scan",
    "ResolutionError",
]


class ResolutionError(RuntimeError):
    """Consecutive contour nodes differ in phase by more than pi/2."""


def _lam_array(lam):
    if isinstance(lam, SpectralPoint):
        lam = lam.lam
    return np.atleast_1d(np.asarray(lam, dtype=complex))


def pair_determinant(kind_a: str, kind_b: str, lam, y, ctx: ModeContext, *, log_form: bool = False):
    """``a(y) b'(y) - a'(y) b(y)`` for two mode kinds.

    Returns an array of shape ``(K, Q)``; with ``log_form`` a pair
    ``(exponent, envelope_det)`` instead.
    """
    lam = _lam_array(lam)
    y = np.atleast_1d(np.asarray(y, float))
    Ea, Za = mode_envelopes(kind_a, lam, y, ctx)
    Eb, Zb = mode_envelopes(kind_b, lam, y, ctx)
    d = Za[..., 0] * Zb[..., 1] - Za[..., 1] * Zb[..., 0]
    if log_form:
        return Ea + Eb, d
    return np.exp(Ea + Eb) * d


def wronskian(lam, y, ctx: ModeContext):
    """Evans function ``W_lam(y) = phi+ phi-' - phi+' phi-`` (modes as normalised in ``modes``)."""
    out = pair_determinant("phi_plus", "phi_minus", lam, y, ctx)
    return out[0] if out.shape[0] == 1 else out


def evans_function(lams, ctx: ModeContext) -> np.ndarray:
    """``W_lam(0)`` for a batch of ``lam``."""
    return pair_determinant("phi_plus", "phi_minus", lams, [0.0], ctx)[:, 0]


def aux_determinants(lam, y, ctx: ModeContext) -> dict:
    """The four determinants ``J = [phi+, psi+]``, ``I = [phi-, psi+]``,
    ``H = [phi-, psi-]`` and ``K = [phi+, psi-]`` at ``y``."""
    pairs = {"J": ("phi_plus", "psi_plus"), "I": ("phi_minus", "psi_plus"),
             "H": ("phi_minus", "psi_minus"), "K": ("phi_plus", "psi_minus")}
    out = {}
    for name, (a, b) in pairs.items():
        v = pair_determinant(a, b, lam, y, ctx)
        out[name] = v[0] if v.shape[0] == 1 else v
    return out


@dataclass(frozen=True)
class EvansSample:
    lam: SpectralPoint
    W0: complex
    y: np.ndarray
    J: np.ndarray
    I: np.ndarray
    H: np.ndarray
    K: np.ndarray


def evans_sample(lam, y, ctx: ModeContext) -> EvansSample:
    sp_ = spectral_point(lam, ctx.model)
    y = np.atleast_1d(np.asarray(y, float))
    aux = aux_determinants(sp_.lam, y, ctx)
    return EvansSample(lam=sp_, W0=complex(wronskian(sp_.lam, [0.0], ctx)[0]), y=y, **aux)


def abel_factor(y, ctx: ModeContext):
    """``omega(y)^2 e^{c* y}``; any Wronskian times this is constant in ``y``."""
    y = np.asarray(y, float)
    if ctx.pure_heat:
        return np.ones_like(y)
    return np.exp(2.0 * ctx.weight.logw(y) + ctx.model.cstar * y)


def constancy_defect(lam, ys, ctx: ModeContext) -> float:
    """Max relative deviation of ``W(y) omega^2(y) e^{c* y}`` from ``W(0)``."""
    ys = np.asarray(ys, float)
    E, d = pair_determinant("phi_plus", "phi_minus", lam, np.append(ys, 0.0), ctx, log_form=True)
    # combine the exponent with log(abel factor) before exponentiating
    logabel = np.log(abel_factor(ys, ctx))
    vals = np.exp(E[:, :-1] + logabel) * d[:, :-1]
    w0 = d[:, -1:]
    return float(np.max(np.abs(vals - w0) / np.abs(w0)))


def matched_scale(ctx: ModeContext, window=(-5.0, 5.0), n: int = 501) -> complex:
    """Scalar ``s`` with ``s phi^-`` closest to ``q*'/omega`` on ``window`` at ``lam = 0``."""
    x = np.linspace(window[0], window[1], n)
    E, Z = mode_envelopes("phi_minus", 0.0, x, ctx)
    v = (np.exp(E) * Z[..., 0])[0]
    ref = derivative_mode(ctx.front, ctx.weight)(x)
    return complex(np.vdot(v, ref) / np.vdot(v, v))


# ---------------------------------------------------------------------------
# winding numbers
# ---------------------------------------------------------------------------


def rectangle_contour(re_lo, re_hi, im_lo, im_hi, n: int) -> np.ndarray:
    """``n`` nodes per side, counter-clockwise, first node not repeated."""
    t = np.linspace(0.0, 1.0, n, endpoint=False)
    bottom = re_lo + (re_hi - re_lo) * t + 1j * im_lo
    right = re_hi + 1j * (im_lo + (im_hi - im_lo) * t)
    top = re_hi - (re_hi - re_lo) * t + 1j * im_hi
    left = re_lo + 1j * (im_hi - (im_hi - im_lo) * t)
    return np.concatenate([bottom, right, top, left])


def winding_number(values: np.ndarray, max_jump: float = np.pi / 2) -> int:
    """Winding number of a closed sampled curve around the origin.

    Raises
    ------
    ResolutionError
        If the phase changes by more than ``max_jump`` between neighbours.
    """
    v = np.asarray(values, complex)
    if np.any(v == 0):
        raise ZeroDivisionError("curve passes through zero")
    steps = np.angle(np.roll(v, -1) / v)
    if np.max(np.abs(steps)) > max_jump:
        raise ResolutionError(f"phase jump {np.max(np.abs(steps)):.3f} exceeds {max_jump:.3f}; refine the contour")
    return int(round(steps.sum() / (2 * np.pi)))


def no_unstable_spectrum_scan(contour: np.ndarray, ctx: ModeContext | None = None, fun=None) -> int:
    """Winding number of ``lam -> W_lam(0)`` (or ``fun``) along ``contour``."""
    contour = np.asarray(contour, complex)
    if fun is not None:
        return winding_number(fun(contour))
    if np.any((contour.imag == 0) & (contour.real <= 0)):
        raise ValueError("contour touches the closed negative real axis")
    return winding_number(evans_function(contour, ctx))
