"""Compiled kernels: 2x2 matrix exponential and a fourth-order Magnus sweep.

The envelope ``Z = e^{-E(x)} P`` solves ``Z' = (A(x, lam) - r I) Z`` with

    A = [[0, 1], [lam - z0(x), -z1(x)]]

and a rate ``r`` that is constant on each side of ``x = 0``.  Each step uses the
two-point Gauss Magnus expansion

    Omega = h/2 (A1 + A2) + sqrt(3) h^2 / 12 [A2, A1]

and an overflow-safe closed-form exponential.
"""

from __future__ import annotations

import numpy as np
from numba import njit

SQ3 = np.sqrt(3.0)
# Gauss nodes on [0, 1]
GAUSS = (0.5 - SQ3 / 6.0, 0.5 + SQ3 / 6.0)


@njit(cache=True)
def expm2(m11, m12, m21, m22):
    """exp of a complex 2x2 matrix, written so that ``e^{tau} cosh s`` never overflows."""
    tau = 0.5 * (m11 + m22)
    n11 = m11 - tau
    s2 = n11 * n11 + m12 * m21
    s = np.sqrt(s2)
    if s.real < 0:
        s = -s
    if abs(s) < 1e-4:
        # series for cosh(s), sinh(s)/s
        ch = 1.0 + s2 / 2.0 + s2 * s2 / 24.0
        sh = 1.0 + s2 / 6.0 + s2 * s2 / 120.0
        et = np.exp(tau)
        c = et * ch
        d = et * sh
    else:
        ep = np.exp(tau + s)
        em = np.exp(tau - s)
        c = 0.5 * (ep + em)
        d = 0.5 * (ep - em) / s
    return c + d * n11, d * m12, d * m21, c - d * n11


@njit(cache=True)
def magnus_matrix(lam, r, a0, a1, b0, b1, hh):
    """Magnus exponent minus ``r hh I`` for one step.

    ``a0, b0`` are (z0, z1) at the first Gauss point *in the direction of
    travel*, ``a1, b1`` at the second.
    """
    # A_i = [[0, 1], [p_i, q_i]]
    p1 = lam - a0
    q1 = -b0
    p2 = lam - a1
    q2 = -b1
    half = 0.5 * hh
    k = SQ3 * hh * hh / 12.0
    # commutator [A2, A1]
    c11 = p1 - p2
    c12 = q1 - q2
    c21 = q2 * p1 - q1 * p2
    c22 = p2 - p1
    o11 = k * c11 - r * hh
    o12 = half * 2.0 + k * c12
    o21 = half * (p1 + p2) + k * c21
    o22 = half * (q1 + q2) + k * c22 - r * hh
    return o11, o12, o21, o22


@njit(cache=True)
def sweep(g0, g1, h, lam, r_left, r_right, j0, z_start, i_start, i_end, out):
    """Integrate envelopes on the uniform grid for a batch of ``lam``.

    Parameters
    ----------
    g0, g1 : (n_int, 2) float arrays
        z0 and z1 at the two Gauss points of every interval (ascending order).
    lam, r_left, r_right : (K,) complex arrays
    j0 : int
        Index of the node ``x = 0``; intervals left of it use ``r_left``.
    z_start : (K, 2) complex
    i_start, i_end : int
        Node indices; the sweep runs towards ``i_end``.
    out : (K, N, 2) complex
        Written in place for nodes between ``i_start`` and ``i_end``.
    """
    K = lam.shape[0]
    step = 1 if i_end > i_start else -1
    hh = step * h
    for k in range(K):
        la = lam[k]
        z1 = z_start[k, 0]
        z2 = z_start[k, 1]
        out[k, i_start, 0] = z1
        out[k, i_start, 1] = z2
        i = i_start
        while i != i_end:
            if step > 0:
                n = i
                a0, a1 = g0[n, 0], g0[n, 1]
                b0, b1 = g1[n, 0], g1[n, 1]
            else:
                n = i - 1
                a0, a1 = g0[n, 1], g0[n, 0]
                b0, b1 = g1[n, 1], g1[n, 0]
            r = r_left[k] if n < j0 else r_right[k]
            o11, o12, o21, o22 = magnus_matrix(la, r, a0, a1, b0, b1, hh)
            e11, e12, e21, e22 = expm2(o11, o12, o21, o22)
            w1 = e11 * z1 + e12 * z2
            w2 = e21 * z1 + e22 * z2
            z1 = w1
            z2 = w2
            i += step
            out[k, i, 0] = z1
            out[k, i, 1] = z2


@njit(cache=True)
def partial_steps(zn, lam, r, a0, a1, b0, b1, hh, out):
    """One Magnus step per (lam, query) pair; shapes (K, Q) except ``a*, b*, hh`` (Q,)."""
    K, Q = zn.shape[0], zn.shape[1]
    for k in range(K):
        for j in range(Q):
            if hh[j] == 0.0:
                out[k, j, 0] = zn[k, j, 0]
                out[k, j, 1] = zn[k, j, 1]
                continue
            o11, o12, o21, o22 = magnus_matrix(lam[k], r[k, j], a0[j], a1[j], b0[j], b1[j], hh[j])
            e11, e12, e21, e22 = expm2(o11, o12, o21, o22)
            out[k, j, 0] = e11 * zn[k, j, 0] + e12 * zn[k, j, 1]
            out[k, j, 1] = e21 * zn[k, j, 0] + e22 * zn[k, j, 1]
