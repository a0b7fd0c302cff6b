"""Command-line entry point.

Every command writes ``<command>.csv`` and ``<command>.json`` into ``--out``;
``--format svg`` adds a line plot.  Exit status: 0 ok, 2 configuration error,
3 numerical failure, 4 failed assertion.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_ASSERT = 0, 2, 3, 4
SEED = 0
COMMANDS = ("front", "modes", "evans", "green-lambda", "green-time", "simulate", "verify-all")


class ConfigError(ValueError):
    pass


class AssertionFailure(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------


def _atomic_write(path: Path, text: str):
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _header(command: str, config: dict) -> str:
    echo = json.dumps(config, sort_keys=True)
    return f"# kppstab {__version__}\n# command: {command}\n# config: {echo}\n# seed: {SEED}\n"


def write_csv(path: Path, command: str, config: dict, columns: list[str], rows) -> None:
    """Fixed 17-significant-digit formatting so reruns are byte-identical."""
    lines = [_header(command, config) + ",".join(columns)]
    for row in np.atleast_2d(np.asarray(rows, float)):
        lines.append(",".join(f"{v:.17g}" for v in row))
    _atomic_write(path, "\n".join(lines) + "\n")


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(u) for k, u in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(u) for u in v]
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer, int)):
        return int(v)
    if isinstance(v, (complex, np.complexfloating)):
        return [float(v.real), float(v.imag)]
    if isinstance(v, (np.floating, float)):
        return float(v) if np.isfinite(v) else None
    return v


def write_json(path: Path, payload: dict) -> None:
    _atomic_write(path, json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")


def write_svg(path: Path, series: dict, *, loglog: bool = False, title: str = "",
              width: int = 640, height: int = 420) -> None:
    """Polyline plot of ``{label: (x, y)}``; no plotting library involved."""
    pad = 50
    colours = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"]
    data = {}
    for k, (x, y) in series.items():
        x, y = np.asarray(x, float), np.asarray(y, float)
        if loglog:
            keep = (x > 0) & (y > 0)
            x, y = np.log10(x[keep]), np.log10(y[keep])
        keep = np.isfinite(x) & np.isfinite(y)
        data[k] = (x[keep], y[keep])
    allx = np.concatenate([v[0] for v in data.values()])
    ally = np.concatenate([v[1] for v in data.values()])
    x0, x1 = allx.min(), allx.max()
    y0, y1 = ally.min(), ally.max()
    x1 = x1 if x1 > x0 else x0 + 1
    y1 = y1 if y1 > y0 else y0 + 1

    def sx(v):
        return pad + (v - x0) / (x1 - x0) * (width - 2 * pad)

    def sy(v):
        return height - pad - (v - y0) / (y1 - y0) * (height - 2 * pad)

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
             f'<rect width="{width}" height="{height}" fill="white"/>',
             f'<text x="{width / 2}" y="20" text-anchor="middle" font-size="14">{title}</text>',
             f'<rect x="{pad}" y="{pad}" width="{width - 2 * pad}" height="{height - 2 * pad}" '
             'fill="none" stroke="black"/>']
    lab = "log10 " if loglog else ""
    parts.append(f'<text x="{pad}" y="{height - 15}" font-size="11">{lab}x: [{x0:.3g}, {x1:.3g}]</text>')
    parts.append(f'<text x="{width - pad}" y="{height - 15}" text-anchor="end" font-size="11">'
                 f'{lab}y: [{y0:.3g}, {y1:.3g}]</text>')
    for i, (k, (x, y)) in enumerate(data.items()):
        pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(x, y))
        c = colours[i % len(colours)]
        parts.append(f'<polyline fill="none" stroke="{c}" stroke-width="1.5" points="{pts}"/>')
        parts.append(f'<text x="{pad + 8}" y="{pad + 16 + 14 * i}" font-size="11" fill="{c}">{k}</text>')
    parts.append("</svg>")
    _atomic_write(path, "\n".join(parts) + "\n")


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


def load_config(args) -> dict:
    from .model import read_config

    cfg = {}
    if args.config:
        try:
            cfg = read_config(args.config)
        except KeyError as exc:
            raise ConfigError(f"unknown config key {exc.args[0]!r}") from None
        except (OSError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
    for key in ("nonlinearity", "beta", "alpha"):
        v = getattr(args, key, None)
        if v is not None:
            cfg[key] = v
    return cfg


def build_context(cfg: dict):
    from .modes import default_context

    kw = {}
    if "domain_left" in cfg:
        kw["X_L"] = cfg["domain_left"]
    if "domain_right" in cfg:
        kw["X_R"] = cfg["domain_right"]
    if "grid_step" in cfg:
        kw["h"] = cfg["grid_step"]
    return default_context(cfg.get("nonlinearity", "kpp"), cfg.get("beta", 0.2), cfg.get("alpha", 0.8), **kw)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_front(args, cfg, out):
    from .front import fit_asymptotics, front_residual

    from .front import solve_front
    from .model import get_nonlinearity, make_model

    nl = get_nonlinearity(cfg.get("nonlinearity", "kpp"))
    m = make_model(float(nl.f1(0.0)), float(nl.f1(1.0)), cfg.get("beta", 0.2), cfg.get("alpha", 0.8))
    f = solve_front(nl, m, args.xmin, args.xmax, args.h)
    stride = max(1, round(args.stride / f.h))
    rows = np.column_stack([f.grid, f.q, f.dq])[::stride]
    write_csv(out / "front.csv", "front", cfg, ["x", "q", "dq"], rows)
    a, b, fit_err = fit_asymptotics(f, m)
    summary = {"a": a, "b": b, "fit_err": fit_err, "residual": float(np.max(np.abs(front_residual(f, m, nl)))),
               "cstar": m.cstar}
    series = {"q": (f.grid[::stride], f.q[::stride])}
    return summary, series, False


def _complex_arg(s: str) -> complex:
    """``"re,im"`` or a Python complex literal such as ``"0.1+0.2j"``."""
    s = s.replace(" ", "")
    try:
        if "," in s:
            re_, im = s.split(",")
            return complex(float(re_), float(im))
        return complex(s)
    except ValueError:
        raise ConfigError(f"cannot parse complex number {s!r}") from None


KIND_ALIASES = {"phi+": "phi_plus", "psi+": "psi_plus", "phi-": "phi_minus", "psi-": "psi_minus"}


def cmd_modes(args, cfg, out):
    from .modes import envelope_residual, mode_envelopes, solve_mode

    ctx = build_context(cfg)
    lam = _complex_arg(args.lam)
    kind = KIND_ALIASES.get(args.kind, args.kind)
    x = np.linspace(args.xmin, args.xmax, args.n)
    E, Z = mode_envelopes(kind, lam, x, ctx)
    v = np.exp(E[0]) * Z[0, :, 0]
    dv = np.exp(E[0]) * Z[0, :, 1]
    z1, z2 = Z[0, :, 0], Z[0, :, 1]
    rows = np.column_stack([x, z1.real, z1.imag, z2.real, z2.imag, E[0].real, v.real, v.imag, dv.real, dv.imag])
    write_csv(out / "modes.csv", "modes", cfg,
              ["x", "Z1_re", "Z1_im", "Z2_re", "Z2_im", "exponent_re", "mode_re", "mode_im", "dmode_re", "dmode_im"],
              rows)
    res = envelope_residual(solve_mode(kind, lam, ctx), ctx)
    return {"kind": kind, "lam": lam, "envelope_residual": res}, {"|envelope|": (x, np.abs(Z[0, :, 0]))}, False


def cmd_evans(args, cfg, out):
    from .acceptance import unstable_rectangle, winding_on_rectangle
    from .evans import evans_function, no_unstable_spectrum_scan, rectangle_contour

    ctx = build_context(cfg)
    if args.grid:
        try:
            re_lo, re_hi, im_lo, im_hi, n = (float(v) for v in args.grid.split(","))
        except ValueError:
            raise ConfigError(f"--grid needs relo,rehi,imlo,imhi,n; got {args.grid!r}") from None
        lam = rectangle_contour(re_lo, re_hi, im_lo, im_hi, int(n))
        wind, n = no_unstable_spectrum_scan(lam, ctx), int(n)
    else:
        wind, n = winding_on_rectangle(ctx, n=args.n)
        lam = unstable_rectangle(n)
    W = evans_function(lam, ctx)
    rows = np.column_stack([lam.real, lam.imag, W.real, W.imag])
    write_csv(out / "evans.csv", "evans", cfg, ["lam_re", "lam_im", "W_re", "W_im"], rows)
    W0 = complex(evans_function([0.0], ctx)[0])
    return {"winding": wind, "nodes_per_side": n, "W_at_0": W0}, {"W": (W.real, W.imag)}, False


def cmd_green_lambda(args, cfg, out):
    from .green_lambda import green_lambda, green_residual

    ctx = build_context(cfg)
    lam = _complex_arg(args.lam)
    x = np.linspace(args.xmin, args.xmax, args.n)
    G = np.asarray(green_lambda(lam, x, args.y, ctx)).ravel()
    write_csv(out / "green-lambda.csv", "green-lambda", cfg, ["x", "G_re", "G_im"], np.column_stack([x, G.real, G.imag]))
    res = green_residual(lam, args.y, ctx)
    return {"lam": lam, "y": args.y, "ode_residual": res}, {"|G|": (x, np.abs(G))}, False


def cmd_green_time(args, cfg, out):
    from .laplace import decay_slope, green_time_matrix

    ctx = build_context(cfg)
    if args.slope:
        slope, ts, sups = decay_slope(ctx, y0=args.y)
        write_csv(out / "green-time.csv", "green-time", cfg, ["t", "sup_near_diagonal"], np.column_stack([ts, sups]))
        return {"slope": slope, "y0": args.y}, {"sup |G|": (ts, sups)}, True
    x = np.linspace(args.xmin, args.xmax, args.n)
    G = green_time_matrix(args.t, x, [args.y], ctx)[:, 0]
    write_csv(out / "green-time.csv", "green-time", cfg, ["x", "G"], np.column_stack([x, G]))
    return {"t": args.t, "y": args.y, "max_abs": float(np.max(np.abs(G)))}, {"G": (x, G)}, False


def cmd_simulate(args, cfg, out):
    from .simulate import Simulator, run_decay_experiment

    ctx = build_context(cfg)
    sim = Simulator(ctx, dt=args.dt)
    rep = run_decay_experiment(lambda x: args.amp * np.exp(-x * x), args.T, sim=sim)
    step = max(1, round(args.sample / sim.dt))
    rows = np.column_stack([rep.sup_series[:, 0], rep.sup_series[:, 1], rep.theta_series[:, 1]])[::step]
    write_csv(out / "simulate.csv", "simulate", cfg, ["t", "weighted_sup", "theta"], rows)
    summary = {
        "amp": args.amp, "T": args.T, "slope": rep.slope, "theta_max": float(rep.theta_series[:, 1].max()),
        "theta_1": rep.theta_at(1.0), "eps_data": rep.eps_data, "moment3": rep.moment3,
        "omega_inf": rep.omega_const, "boundary_max": rep.boundary_max, "guard_band_ok": rep.guard_ok,
        "chi_ratio": rep.chi_ratio,
    }
    t = rows[1:, 0]
    return summary, {"sup |p|/(1+|x|)": (1 + t, rows[1:, 1])}, True


def cmd_verify_all(args, cfg, out):
    from .acceptance import report, run_all

    numbers = [int(k) for k in args.only.split(",")] if args.only else None
    results = run_all(numbers, echo=lambda s: print(s, flush=True))
    rep = report(results)
    rows = [[c.number, float(c.passed), c.seconds] for c in results]
    write_csv(out / "verify-all.csv", "verify-all", cfg, ["criterion", "passed", "seconds"], rows)
    if rep["passed"] != rep["total"]:
        write_json(out / "verify-all.json", rep)
        raise AssertionFailure(f"{rep['total'] - rep['passed']} of {rep['total']} criteria failed")
    return rep, None, False


def report_bundle(results_dir) -> dict:
    """Merge the per-command summaries of ``results_dir`` into one dictionary.

    Raises
    ------
    FileNotFoundError
        Listing every missing summary by name.
    """
    d = Path(results_dir)
    missing = [c for c in COMMANDS if not (d / f"{c}.json").is_file()]
    if missing:
        raise FileNotFoundError("missing summaries: " + ", ".join(missing))
    return {c: json.loads((d / f"{c}.json").read_text()) for c in COMMANDS}


def cmd_report(args, cfg, out):
    try:
        bundle = report_bundle(args.results or out)
    except FileNotFoundError as exc:
        raise ConfigError(str(exc)) from None
    return bundle, None, False


HANDLERS = {
    "front": cmd_front,
    "modes": cmd_modes,
    "evans": cmd_evans,
    "green-lambda": cmd_green_lambda,
    "green-time": cmd_green_time,
    "simulate": cmd_simulate,
    "verify-all": cmd_verify_all,
    "report": cmd_report,
}


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value file (nonlinearity, beta, alpha, domain_left, domain_right, grid_step)")
    common.add_argument("--out", default="results", help="output directory (default: results)")
    common.add_argument("--format", choices=("csv", "json", "svg"), default="csv",
                        help="csv and json always written; svg adds a plot")
    common.add_argument("--nonlinearity")
    common.add_argument("--beta", type=float)
    common.add_argument("--alpha", type=float)

    p = argparse.ArgumentParser(prog="kppstab", description="Critical Fisher-KPP front stability laboratory")
    p.add_argument("--version", action="version", version=f"kppstab {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("front", parents=[common], help="solve for the critical front")
    s.add_argument("--stride", type=float, default=0.1, help="output spacing in x")
    s.add_argument("--xmin", type=float, default=-60.0, help="left truncation")
    s.add_argument("--xmax", type=float, default=60.0, help="right truncation")
    s.add_argument("--h", type=float, default=0.02, help="grid step")

    s = sub.add_parser("modes", parents=[common], help="tabulate one mode")
    s.add_argument("--kind", default="phi_plus", choices=tuple(KIND_ALIASES) + tuple(KIND_ALIASES.values()))
    s.add_argument("--lambda", "--lam", dest="lam", default="0.1,0.1", help="re,im or a complex literal")
    s.add_argument("--xmin", type=float, default=-20.0)
    s.add_argument("--xmax", type=float, default=20.0)
    s.add_argument("-n", type=int, default=401)

    s = sub.add_parser("evans", parents=[common], help="Evans function on the unstable rectangle")
    s.add_argument("-n", type=int, default=80, help="initial nodes per side")
    s.add_argument("--grid", help="relo,rehi,imlo,imhi,n: scan this rectangle instead")

    s = sub.add_parser("green-lambda", parents=[common], help="resolvent kernel G_lam(., y)")
    s.add_argument("--lambda", "--lam", dest="lam", default="0.1,0.1", help="re,im or a complex literal")
    s.add_argument("--y", type=float, default=0.0)
    s.add_argument("--xmin", type=float, default=-20.0)
    s.add_argument("--xmax", type=float, default=20.0)
    s.add_argument("-n", type=int, default=401)

    s = sub.add_parser("green-time", parents=[common], help="temporal Green's function G(t, ., y)")
    s.add_argument("--t", type=float, default=5.0)
    s.add_argument("--y", type=float, default=0.0)
    s.add_argument("--xmin", type=float, default=-20.0)
    s.add_argument("--xmax", type=float, default=20.0)
    s.add_argument("-n", type=int, default=81)
    s.add_argument("--slope", action="store_true", help="fit the decay of sup_{|x-y|<=1} |G| on [10, 200]")

    s = sub.add_parser("simulate", parents=[common], help="nonlinear decay experiment")
    s.add_argument("--amp", type=float, default=0.01)
    s.add_argument("--T", type=float, default=200.0)
    s.add_argument("--dt", type=float, default=0.01)
    s.add_argument("--sample", type=float, default=0.5, help="CSV output spacing in t")

    s = sub.add_parser("verify-all", parents=[common], help="run the acceptance suite")
    s.add_argument("--only", help="comma-separated criterion numbers")

    s = sub.add_parser("report", parents=[common], help="merge per-command summaries")
    s.add_argument("--results", help="directory of prior runs (default: --out)")
    return p


def dispatch(args) -> int:
    from .evans import ResolutionError
    from .front import FrontSolveError
    from .laplace import ContourError, QuadratureError
    from .simulate import BlowUpError, GuardBandError

    out = Path(args.out)
    try:
        cfg = load_config(args)
        out.mkdir(parents=True, exist_ok=True)
        summary, series, loglog = HANDLERS[args.command](args, cfg, out)
        name = "summary" if args.command == "report" else args.command
        write_json(out / f"{name}.json", {"command": args.command, "config": cfg, "seed": SEED, **summary}
                   if args.command != "report" else summary)
        if args.format == "svg" and series:
            write_svg(out / f"{args.command}.svg", series, loglog=loglog, title=args.command)
    except AssertionFailure as exc:
        print(f"assertion failure: {exc}", file=sys.stderr)
        return EXIT_ASSERT
    except (FloatingPointError, FrontSolveError, QuadratureError, ResolutionError, ContourError,
            GuardBandError, BlowUpError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, ValueError, KeyError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def main(argv=None) -> int:
    return dispatch(build_parser().parse_args(argv))


if __name__ == "__main__":
    sys.exit(main())
