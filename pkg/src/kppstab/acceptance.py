"""Acceptance checks, one function per criterion, plus the frozen bound baselines.

Every check returns a :class:`Criterion`; ``run_all`` collects them.  The
bound constants of criterion 11 are compared against ``baselines.json``,
written once by :func:`freeze_baselines`.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import evans, green_lambda, laplace, simulate
from .front import fit_asymptotics
from .modes import ModeContext, cancellation_Lambda, default_context, in_omega_delta

BASELINE_PATH = Path(__file__).with_name("baselines.json")
BASELINE_FACTOR = 1.5


@dataclass
class Criterion:
    number: int
    name: str
    passed: bool
    values: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        summary = ", ".join(f"{k}={_fmt(v)}" for k, v in self.values.items())
        return f"[{tag}] {self.number:2d} {self.name}: {summary}"


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.4g}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(u) for u in v) + "]"
    return str(v)


def _timed(fn):
    def wrapper(*a, **kw):
        t0 = time.perf_counter()
        out = fn(*a, **kw)
        out.seconds = time.perf_counter() - t0
        return out

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def _ctx(ctx):
    return default_context() if ctx is None else ctx


# ---------------------------------------------------------------------------
# 1-6: kernels and determinants
# ---------------------------------------------------------------------------


@_timed
def heat_kernel_oracle(tol: float = 1e-6) -> Criterion:
    """Pure-heat contour values against the closed-form kernel on a 5x5x5 grid."""
    hc = ModeContext.pure_heat_model()
    ts = (0.3, 1.0, 4.0, 20.0, 100.0)
    xs = np.array([-5.0, -1.0, 0.0, 2.0, 7.0])
    ys = np.array([-3.0, 0.0, 0.5, 2.0, 6.0])
    err = 0.0
    for t in ts:
        G = laplace.green_time_matrix(t, xs, ys, hc)
        ref = laplace.heat_kernel(t, xs[:, None], ys[None, :])
        err = max(err, float(np.max(np.abs(G / ref - 1))))
    return Criterion(1, "heat-kernel oracle", err < tol, {"max_rel_err": err, "tol": tol})


def small_region_samples(n: int = 10, seed: int = 1):
    """``n`` reproducible ``(lam, y)`` with ``0.1 <= |lam| <= 0.5`` off the negative axis."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        r = np.sqrt(rng.uniform(0.01, 0.25))
        th = rng.uniform(-0.9 * np.pi, 0.9 * np.pi)
        y = round(rng.uniform(-10, 10) / 0.02) * 0.02
        out.append((complex(r * np.exp(1j * th)), float(y)))
    return out


@_timed
def resolvent_oracle(ctx=None, tol: float = 1e-4) -> Criterion:
    """Mode-built ``G_lam`` against a finite-difference resolvent solve."""
    ctx = _ctx(ctx)
    worst = 0.0
    for lam, y in small_region_samples():
        x, g = green_lambda.resolvent_oracle(lam, y, ctx)
        sel = (x > -30) & (x < 30)
        G = green_lambda.green_lambda(lam, x[sel], y, ctx)
        worst = max(worst, float(np.max(np.abs(G - g[sel])) / np.max(np.abs(g[sel]))))
    return Criterion(2, "resolvent oracle", worst < tol, {"max_rel_err": worst, "tol": tol})


@_timed
def evans_branch_point(ctx=None) -> Criterion:
    """``W_0`` with ``phi^-`` scaled to ``q*'/w``: nonzero, and ``-g* b`` at ``y = 20``."""
    ctx = _ctx(ctx)
    _, b, _ = fit_asymptotics(ctx.front, ctx.model)
    s = evans.matched_scale(ctx)
    W = evans.wronskian(0.0, [0.0, 20.0], ctx) * s
    target = -ctx.model.gstar * b
    rel = abs(W[1] - target) / abs(target)
    ok = abs(W[0]) > 1e-3 and rel < 0.05
    return Criterion(3, "Evans function at the branch point", bool(ok),
                     {"|W0(0)|": float(abs(W[0])), "W0(20)": float(W[1].real), "-g*b": float(target),
                      "rel_err": float(rel)})


def unstable_rectangle(n: int):
    """Boundary of ``[delta0, 10.5] x [-10.5, 10.5]``; beyond ``|lam| = 10`` the large-lambda bound rules out zeros."""
    return evans.rectangle_contour(laplace.ContourParams().delta0, 10.5, -10.5, 10.5, n)


def winding_on_rectangle(ctx, n: int = 80, n_max: int = 1280) -> tuple[int, int]:
    """Winding number, doubling the resolution on :class:`evans.ResolutionError`."""
    while True:
        try:
            return evans.no_unstable_spectrum_scan(unstable_rectangle(n), ctx), n
        except evans.ResolutionError:
            if 2 * n > n_max:
                raise
            n *= 2


@_timed
def determinant_identities(ctx=None, tol: float = 1e-6) -> Criterion:
    """``J = 2 sqrt(lam)`` right of 1, Abel constancy, and winding number 0."""
    ctx = _ctx(ctx)
    # J pairs a decaying with a growing mode, so it is only well conditioned
    # while e^{2 Re sqrt(lam) (X_R - y)} eps stays small, i.e. |lam| of order 1
    j_lams = [0.04, 0.01 + 0.02j, 0.05j, 0.1 + 0.1j, 0.3 + 0.3j, -0.2 + 1j]
    lams = [0.04, 0.3 + 0.3j, -0.2 + 1j, 5 + 5j]
    ys = [1.0, 2.0, 5.0, 10.0, 20.0]
    j_err = 0.0
    for lam in j_lams:
        J = evans.aux_determinants(lam, ys, ctx)["J"]
        j_err = max(j_err, float(np.max(np.abs(J / (2 * np.sqrt(lam)) - 1))))
    c_err = max(evans.constancy_defect(lam, [-10, -5, -1, 0, 1, 5, 10], ctx) for lam in lams)
    wind, n = winding_on_rectangle(ctx)
    ok = j_err < tol and c_err < tol and wind == 0
    return Criterion(4, "determinant identities", ok,
                     {"J_rel_err": j_err, "constancy": c_err, "winding": wind, "nodes_per_side": n})


@_timed
def cancellation(ctx=None, x: float = 3.0, angle: float = np.pi / 4) -> Criterion:
    """Convergence of ``Lambda(x, lam)`` as ``lam -> 0`` along a ray and its decay in ``x``."""
    ctx = _ctx(ctx)
    mods = 0.04 / 4.0 ** np.arange(5)
    vals = np.array([np.ravel(cancellation_Lambda([x], m * np.exp(1j * angle), ctx))[0] for m in mods])
    d = np.abs(np.diff(vals))
    ratios = d[:-1] / d[1:]
    xs = np.arange(5.0, 26.0)
    L = np.abs(np.ravel(cancellation_Lambda(xs, 1e-3 * np.exp(1j * angle), ctx)))
    rate = -float(np.polyfit(xs, np.log(L), 1)[0])
    alpha = ctx.model.alpha
    ok = bool(np.all(ratios >= 4.0) and rate >= alpha)
    return Criterion(5, "cancellation near the branch point", ok,
                     {"shrink_ratios": [float(r) for r in ratios], "decay_rate": rate, "alpha": alpha})


@_timed
def contour_independence(ctx=None, tol: float = 1e-6) -> Criterion:
    """``G(t, x, y)`` under ``L = 4 -> 6`` and ``theta = 5 pi/6 -> 3 pi/4``."""
    ctx = _ctx(ctx)
    pts = [(5.0, 3.0, -2.0), (1.0, 0.0, 0.0), (20.0, 1.0, -1.0), (0.5, 2.0, 0.0)]
    variants = [laplace.ContourParams(L=4.0, theta=5 * np.pi / 6), laplace.ContourParams(L=6.0, theta=5 * np.pi / 6),
                laplace.ContourParams(L=4.0, theta=3 * np.pi / 4), laplace.ContourParams(L=6.0, theta=3 * np.pi / 4)]
    worst = 0.0
    for t, x, y in pts:
        v = np.array([laplace.green_time(t, x, y, ctx, params=p).value for p in variants])
        worst = max(worst, float(np.max(np.abs(v / v[0] - 1))))
    return Criterion(6, "contour independence", worst < tol, {"max_rel_change": worst, "tol": tol})


# ---------------------------------------------------------------------------
# 7-10: time evolution
# ---------------------------------------------------------------------------


@_timed
def linear_decay_rate(ctx=None, y0: float = 0.0) -> Criterion:
    """Slope of ``sup_{|x - y0| <= 1} |G|`` on ``[10, 200]`` and the pure-heat control."""
    ctx = _ctx(ctx)
    slope, ts, sups = laplace.decay_slope(ctx, y0=y0)
    heat, _, _ = laplace.decay_slope(ModeContext.pure_heat_model(), y0=y0)
    ok = abs(slope + 1.5) <= 0.15 and abs(heat + 0.5) <= 0.05
    return Criterion(7, "linear decay rate", bool(ok), {"slope": slope, "heat_slope": heat, "y0": y0})


@_timed
def nonlinear_decay(ctx=None, amp: float = 0.01, T: float = 200.0) -> Criterion:
    """Theta bounded by 3 Theta(1), weighted sup-norm slope, and near-linear scaling."""
    ctx = _ctx(ctx)
    sim = simulate.Simulator(ctx)
    rep = simulate.run_decay_experiment(lambda x: amp * np.exp(-x * x), T, sim=sim)
    rep2 = simulate.run_decay_experiment(lambda x: 2 * amp * np.exp(-x * x), 50.0, sim=sim)
    bound = float(rep.theta_series[:, 1].max() / rep.theta_at(1.0))
    scale = rep2.theta_at(50.0) / rep.theta_at(50.0)
    ok = bound <= 3.0 and abs(rep.slope + 1.5) <= 0.15 and abs(scale / 2 - 1) <= 0.1
    return Criterion(8, "nonlinear decay", bool(ok),
                     {"theta_max/theta(1)": bound, "slope": rep.slope, "scale_ratio_t50": float(scale),
                      "boundary_max": rep.boundary_max, "chi_ratio": rep.chi_ratio})


@_timed
def duhamel(ctx=None, tol: float = 5e-3) -> Criterion:
    """Integral-equation residual for a linear run and two nonlinear runs."""
    ctx = _ctx(ctx)
    sim = simulate.Simulator(ctx)
    xs = [-3.0, -1.5, 0.0, 1.5, 3.0]
    p0 = lambda x: 0.01 * np.exp(-x * x)  # noqa: E731
    res = {}
    for label, nonlinear, t in (("linear_t5", False, 5.0), ("nonlinear_t0.5", True, 0.5), ("nonlinear_t5", True, 5.0)):
        taus = 0.25 * np.arange(round(t / 0.25) + 1)
        _, snaps = simulate.evolve(sim.state(p0), t, nonlinear=nonlinear, snapshots=taus)
        res[label] = simulate.duhamel_residual(snaps, sim, t, xs, nonlinear=nonlinear)
    ok = res["linear_t5"] < 2e-3 and max(res.values()) < tol
    return Criterion(9, "Duhamel identity", bool(ok), res)


def pde_green(ctx, ts, y0: float, xs, sigmas=(0.1, 0.05), sim=None):
    """``G(t, xs, y0)`` from the PDE: Gaussian data of two widths, Richardson in ``sigma^2``."""
    sim = sim or simulate.Simulator(ctx)
    ix = np.array([np.argmin(np.abs(sim.x - x)) for x in xs])
    runs = []
    for s in sigmas:
        _, snaps = simulate.evolve(sim.state(simulate.delta_approximant(y0, s)), max(ts), nonlinear=False,
                                   snapshots=ts)
        runs.append({t: snaps[t][ix] for t in ts})
    r = (sigmas[0] / sigmas[1]) ** 2
    return {t: (r * runs[1][t] - runs[0][t]) / (r - 1) for t in ts}


@_timed
def cross_oracle(ctx=None, y0: float = 0.0, tol: float = 1e-3) -> Criterion:
    """PDE-evolved delta approximants against contour-integrated ``G(t, ., y0)``."""
    ctx = _ctx(ctx)
    ts = (1.0, 5.0, 20.0)
    xs = np.linspace(-6.0, 8.0, 29)
    pde = pde_green(ctx, ts, y0, xs)
    errs = {}
    for t in ts:
        G = laplace.green_time_matrix(t, xs, [y0], ctx)[:, 0]
        errs[f"t={t:g}"] = float(np.max(np.abs(pde[t] - G)) / np.max(np.abs(G)))
    return Criterion(10, "PDE cross-oracle", max(errs.values()) < tol, errs)


# ---------------------------------------------------------------------------
# 11: bound constants
# ---------------------------------------------------------------------------


def bound_constants(ctx=None) -> dict:
    """All fitted envelope constants on fixed sample grids."""
    ctx = _ctx(ctx)
    small = np.array([r * np.exp(1j * a) for r in (0.05, 0.2, 0.45) for a in (-2.5, -1.0, 0.0, 1.0, 2.5)])
    grid = np.linspace(-8.0, 8.0, 17)
    out = {f"small_{k}": v for k, v in green_lambda.verify_small_lambda_bounds(small, grid, grid, ctx).items()}
    big = np.array([r * np.exp(1j * a) for r in (20.0, 100.0) for a in (-2.0, -1.0, 0.0, 1.0, 2.0)])
    big = big[in_omega_delta(big)]
    lb = green_lambda.verify_large_lambda_bound(big, np.linspace(0.5, 5.0, 10), ctx)
    out["large_C"], out["large_eta"] = lb["C"], lb["eta"]
    tb = laplace.verify_time_bounds((0.5, 2.0, 10.0, 50.0), np.linspace(-6, 6, 7), np.linspace(-6, 6, 7), ctx)
    out["time_C_fast"], out["time_C_bulk"] = tb["C_fast"], tb["C_bulk"]
    return out


def freeze_baselines(ctx=None, path=BASELINE_PATH) -> dict:
    consts = bound_constants(ctx)
    Path(path).write_text(json.dumps(consts, indent=2, sort_keys=True) + "\n")
    return consts


@_timed
def bound_regression(ctx=None, path=BASELINE_PATH) -> Criterion:
    """Every constant within a factor 1.5 of its stored baseline."""
    base = json.loads(Path(path).read_text())
    now = bound_constants(ctx)
    ratios = {k: now[k] / base[k] for k in base}
    ok = all(1 / BASELINE_FACTOR <= r <= BASELINE_FACTOR for r in ratios.values()) and set(now) == set(base)
    return Criterion(11, "bound regression", bool(ok), {k: float(v) for k, v in ratios.items()})


CHECKS = {
    1: heat_kernel_oracle,
    2: resolvent_oracle,
    3: evans_branch_point,
    4: determinant_identities,
    5: cancellation,
    6: contour_independence,
    7: linear_decay_rate,
    8: nonlinear_decay,
    9: duhamel,
    10: cross_oracle,
    11: bound_regression,
}


def run_all(numbers=None, echo=None) -> list[Criterion]:
    out = []
    for k in numbers or sorted(CHECKS):
        fn = CHECKS[k]
        c = fn() if k == 1 else fn(default_context())
        out.append(c)
        if echo is not None:
            echo(c.line())
    return out


def report(results: list[Criterion]) -> dict:
    return {
        "passed": sum(c.passed for c in results),
        "total": len(results),
        "criteria": {str(c.number): asdict(c) for c in results},
    }


if __name__ == "__main__":
    print(json.dumps(freeze_baselines(), indent=2, sort_keys=True))
