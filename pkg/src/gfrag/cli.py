"""Command-line front end.

Exit codes: 0 success; 1 a verification check failed; 2 invalid config;
3 quantity requested outside its regime; 4 time step above the stability
bound; 5 numerical failure (root finding, quadrature, inversion, or a PDE
run that has not become stationary).  ``classify`` exits 0, 10 or 11 for
the strict, boundary and failing regimes.
"""
from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from pathlib import Path

import numpy as np

from . import pdmp, profile as prof, spectral, svg, verify
from .config import RunConfig, load_config
from .errors import (CflError, ConfigError, GFragError, InversionError, NoConvergence,
                     NotConverged, QuadratureError, RegimeError)
from .pde import (Grid, build_operator, delta_at_one, evolve_and_observe, indicator,
                  profile_extract)

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_REGIME, EXIT_CFL, EXIT_NUMERIC = 0, 1, 2, 3, 4, 5
EXIT_BOUNDARY, EXIT_FAILS = 10, 11

CONSTANT_KEYS = ("lambda", "beta_plus", "beta_minus", "c1", "c2", "c3", "C", "total_mass")


def _dumps(obj) -> str:
    return verify.dump_json(obj)


def _table_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


def _out_dir(cfg: RunConfig) -> Path:
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    return cfg.output_dir


# -- classify ---------------------------------------------------------------------------
def cmd_classify(cfg: RunConfig, fmt: str) -> int:
    rep = spectral.malthus(cfg.params, cfg.kernel)
    d = rep.to_dict()
    if fmt == "csv":
        sys.stdout.write(_table_csv(["key", "value"], sorted(d.items())))
    else:
        sys.stdout.write(_dumps(d))
    width = max(len(k) for k in d)
    for k, v in d.items():
        print(f"  {k:<{width}}  {v}", file=sys.stderr)
    if rep.regime is spectral.Regime.STRICT:
        return EXIT_OK
    return EXIT_BOUNDARY if rep.regime.is_boundary else EXIT_FAILS


# -- profile ----------------------------------------------------------------------------
def _profile_grid(cfg: RunConfig) -> np.ndarray:
    p = cfg.profile
    x = np.geomspace(p["x_min"], p["x_max"], p["n_points"])
    if p["x_min"] < 1 < p["x_max"]:
        x = np.unique(np.append(x, 1.0))
    return x


def _profile_svg(pr, x) -> str:
    body = x < 1
    series = [svg.Series(x[body], prof.nu(pr, x[body]), "body (x < 1)"),
              svg.Series(x[~body], prof.nu(pr, x[~body]), "tail (x >= 1)")]
    if pr.c2 is not None and pr.beta_minus is not None and np.any(body):
        xb = x[body]
        series.append(svg.Series(xb, pr.c2 * xb ** (pr.beta_minus - 1.0),
                                 "Cramer asymptote", dashed=True))
    return svg.loglog(series, title="asymptotic profile", xlabel="x", ylabel="density")


def cmd_profile(cfg: RunConfig, fmt: str) -> int:
    out = _out_dir(cfg)
    rep = spectral.malthus(cfg.params, cfg.kernel)
    if rep.regime is not spectral.Regime.STRICT:
        consts = dict.fromkeys(CONSTANT_KEYS)
        consts.update(**{"lambda": rep.lambda_star, "beta_plus": rep.beta_plus,
                         "beta_minus": rep.beta_minus})
        consts["regime"] = rep.regime.value
        (out / "constants.json").write_text(_dumps(consts))
        print(f"regime {rep.regime.value}: the profile cannot be normalised", file=sys.stderr)
        return EXIT_REGIME
    pr = prof.build_profile(cfg.params, cfg.kernel,
                            inversion_rtol=cfg.profile["inversion_rtol"])
    consts = pr.constants()
    consts["regime"] = rep.regime.value
    (out / "constants.json").write_text(_dumps(consts))
    x = _profile_grid(cfg)
    dens = prof.nu(pr, x)
    lab = prof.branch(pr, x)
    if fmt == "json":
        (out / "profile.json").write_text(_dumps({"x": x, "nu": dens, "branch": list(lab)}))
    else:
        (out / "profile.csv").write_text(_table_csv(["x", "nu", "branch"], zip(x, dens, lab)))
    if cfg.profile["svg"]:
        (out / "profile.svg").write_text(_profile_svg(pr, x))
    return EXIT_OK


# -- simulate ---------------------------------------------------------------------------
def cmd_simulate(cfg: RunConfig, fmt: str) -> int:
    out = _out_dir(cfg)
    p, k, mc, seed = cfg.params, cfg.kernel, cfg.mc, cfg.seed
    lam = k.lambda_star()
    lo, hi = mc["f_interval"]
    f = indicator(lo, hi)
    n, t, x0 = int(mc["n_paths"]), float(mc["t"]), float(mc["x0"])
    records, skipped = [], {}
    fk = pdmp.feynman_kac(p, k, f, t, x0, n, seed=seed)
    records.append(dict(fk.record(), t=t, x0=x0, f_interval=[lo, hi],
                        scaled=fk.value * math.exp(-lam * t),
                        scaled_stderr=fk.stderr * math.exp(-lam * t)))
    ones = lambda x: np.ones_like(np.asarray(x, dtype=float))
    growth = pdmp.feynman_kac(p, k, ones, t, x0, n, seed=seed)
    records.append(dict(growth.record(), estimator="feynman_kac_total", t=t, x0=x0,
                        expected=math.exp(lam * t)))
    for tm in mc["martingale_times"]:
        m = pdmp.martingale_mean(p, k, float(tm), n, seed=seed, x=x0)
        records.append(dict(m.record(), t=float(tm)))
    try:
        ty, _ = pdmp.tilted_vs_weighted(p, k, f, t, x0, n, seed=seed)
        records.append(dict(ty.record(), t=t, x0=x0, f_interval=[lo, hi]))
    except RegimeError as e:
        skipped["tilted_Y"] = str(e)
    q = mc["L_q"] if mc["L_q"] is not None else lam
    try:
        L = pdmp.estimate_L(p, k, float(q), n, t_max=mc["t_max"], seed=seed)
        records.append(dict(L.record(), q=float(q), analytic=spectral.L(p, k, float(q))))
    except (ConfigError, RegimeError) as e:
        skipped["L"] = str(e)
    try:
        edges = np.geomspace(1e-4, 1e4, 81)
        occ = pdmp.occupation_histogram(p, k, float(mc["occupation_time"]), edges, seed=seed)
        records.append({"estimator": "occupation", "t_total": occ.t_total, "seed": seed,
                        "mass_below_one": occ.mass_below_one,
                        "mass_above_one": occ.mass_above_one})
        (out / "occupation.csv").write_text(_table_csv(
            ["x_lo", "x_hi", "mass"], zip(edges[:-1], edges[1:], occ.mass)))
    except RegimeError as e:
        skipped["occupation"] = str(e)
    if mc["events_log"]:
        rec = pdmp.simulate_path(p, k, pdmp.SimConfig(spectral.XI, math.log(x0), seed, 1, t))
        (out / "events.csv").write_text(pdmp.events_csv(rec))
    if fmt == "csv":
        keys = sorted({key for r in records for key in r})
        rows = [[_csv_cell(r.get(key)) for key in keys] for r in records]
        (out / "estimates.csv").write_text(_table_csv(keys, rows))
    else:
        (out / "estimates.json").write_text(_dumps({"estimates": records, "skipped": skipped}))
    for key, why in skipped.items():
        print(f"skipped {key}: {why}", file=sys.stderr)
    return EXIT_OK


def _csv_cell(v):
    if v is None:
        return ""
    if isinstance(v, list):
        return " ".join(repr(float(x)) for x in v)
    return v


# -- pde --------------------------------------------------------------------------------
def cmd_pde(cfg: RunConfig, fmt: str) -> int:
    out = _out_dir(cfg)
    c = cfg.pde
    grid = Grid(c["x_min"], c["x_max"], c["n_cells"])
    op = build_operator(grid, cfg.params, cfg.kernel)
    lo, hi = c["f_interval"]
    obs_f = [indicator(0.0), indicator(lo, hi), indicator(1.0)]
    names = ["one", f"f_{lo:g}_{hi:g}", "above_one"]
    times = np.linspace(0.0, c["t_final"], c["n_obs"])
    ob = evolve_and_observe(op, delta_at_one(grid), c["t_final"], obs_f, times,
                            method=c["method"], safety=c["dt_safety"], dt=c["dt"])
    if fmt == "json":
        (out / "pde_series.json").write_text(_dumps({
            "t": ob.times, "values": dict(zip(names, ob.values.T)),
            "scaled": dict(zip(names, ob.scaled.T)), "mass": ob.mass, "outflow": ob.outflow,
            "fragment_loss": ob.fragment_loss, "lost_descendants": ob.lost_descendants}))
    else:
        (out / "pde_series.csv").write_text(ob.csv(names))
    converged, rate = True, None
    try:
        table = profile_extract(ob.final, ob.previous)
        rate = table.change_rate
    except NotConverged as e:
        converged = False
        print(f"warning: {e}", file=sys.stderr)
        table = profile_extract(ob.final, ob.previous, rtol=math.inf)
        rate = table.change_rate
    (out / "pde_profile.csv").write_text(_table_csv(
        ["x", "x_lo", "x_hi", "density", "cdf"],
        zip(table.x, table.edges[:-1], table.edges[1:], table.density, table.cdf)))
    (out / "pde_summary.json").write_text(_dumps({
        "t_final": float(ob.final.t), "n_cells": grid.n_cells, "x_min": grid.x_min,
        "x_max": grid.x_max, "method": c["method"], "converged": converged,
        "shape_change_per_unit_time": rate, "mass": float(ob.mass[-1]),
        "corrected_mass": float(ob.corrected_mass[-1]),
        "lambda_star": cfg.kernel.lambda_star()}))
    return EXIT_OK if converged else EXIT_NUMERIC


# -- verify -----------------------------------------------------------------------------
def cmd_verify(cfg: RunConfig, fmt: str, only=None) -> int:
    out = _out_dir(cfg)
    grid_keys = ("x_min", "x_max", "n_cells", "method", "dt_safety", "f_interval")
    pde_cfg = {k: cfg.pde[k] for k in grid_keys}
    mc_cfg = {k: cfg.mc[k] for k in ("n_paths", "occupation_time", "martingale_times")}
    verdicts = verify.run_all(cfg.params, cfg.kernel, cfg.seed, out, pde_cfg=pde_cfg,
                              mc_cfg=mc_cfg, only=only)
    (out / "report.json").write_text(verify.report_json(verdicts))
    if fmt == "csv":
        (out / "report.csv").write_text(_table_csv(
            ["criterion", "status", "detail"], [(v.number, v.status, v.detail) for v in verdicts]))
    return EXIT_OK if all(v.passed for v in verdicts) else EXIT_VERIFY


COMMANDS = {"classify": cmd_classify, "profile": cmd_profile, "simulate": cmd_simulate,
            "pde": cmd_pde, "verify": cmd_verify}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gfrag", description=__doc__.splitlines()[0],
                                 epilog="Exit codes: see the module docstring / README.")
    sub = ap.add_subparsers(dest="command", required=True)
    helps = {"classify": "regime, Malthus exponent and recurrence class",
             "profile": "asymptotic profile table, constants and plot",
             "simulate": "Monte Carlo estimators",
             "pde": "finite-volume solution and late-time profile",
             "verify": "run the cross-validation checks"}
    for name, text in helps.items():
        sp = sub.add_parser(name, help=text)
        sp.add_argument("--config", required=True, type=Path, help="JSON run configuration")
        sp.add_argument("--seed", type=int, default=None, help="override the config seed")
        sp.add_argument("--out", type=Path, default=None, help="override the output directory")
        sp.add_argument("--threads", type=int, default=None, help="worker threads for Monte Carlo")
        sp.add_argument("--format", choices=("json", "csv"), default=None,
                        help="format of the primary output")
        if name == "verify":
            sp.add_argument("--only", type=int, nargs="+", default=None,
                            help="run only these check numbers")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("--seed must be nonnegative")
            cfg.seed = args.seed
        if args.out is not None:
            cfg.output_dir = args.out
        if args.threads is not None:
            if args.threads < 1:
                raise ConfigError("--threads must be positive")
            pdmp.set_threads(args.threads)
        fmt = args.format or ("csv" if args.command in ("pde", "profile") else "json")
        if args.command == "verify":
            return cmd_verify(cfg, fmt, args.only)
        return COMMANDS[args.command](cfg, fmt)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except CflError as e:
        print(f"stability bound: {e}", file=sys.stderr)
        return EXIT_CFL
    except RegimeError as e:
        print(f"regime: {e}", file=sys.stderr)
        return EXIT_REGIME
    except (NoConvergence, QuadratureError, InversionError, NotConverged) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except GFragError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
