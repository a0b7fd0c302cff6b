"""Local decay rate of the temporal Green's function on the diagonal.

The rate approaches -3/2 only for large t; the pure heat kernel gives -1/2.
"""
import numpy as np

from kppstab.laplace import sup_near_diagonal
from kppstab.modes import ModeContext, default_context

ctx = default_context()
heat = ModeContext.pure_heat_model()
ts = np.array([10.0, 30.0, 100.0, 300.0, 1000.0, 3000.0])
sups = np.array([sup_near_diagonal(t, ctx) for t in ts])
hs = np.array([sup_near_diagonal(t, heat) for t in ts])
local = np.diff(np.log(sups)) / np.diff(np.log(ts))
print("    t        sup|G|      local slope   heat sup")
for k, t in enumerate(ts):
    sl = f"{local[k - 1]:+.3f}" if k else "   -  "
    print(f"{t:7.0f}  {sups[k]:.4e}   {sl:>8}     {hs[k]:.4e}")
