"""Solve the critical front, then print the Evans function near lambda = 0."""
import numpy as np

from kppstab.evans import evans_function, matched_scale
from kppstab.front import fit_asymptotics
from kppstab.modes import default_context

ctx = default_context()
a, b, err = fit_asymptotics(ctx.front, ctx.model)
print(f"front tail: q ~ ({a:.5f} + {b:.5f} x) e^(-x)   fit error {err:.1e}")

s = matched_scale(ctx)
for lam in (0.0, 0.01, 0.1j, 0.5 + 0.5j):
    W = s * evans_function(np.array([lam]), ctx)[0]
    print(f"W({lam!s:>10}) = {W.real:+.6f} {W.imag:+.6f}i")
