"""Command line entry point ``cylstable``."""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .connectivity import check_hgamma_domain, rook_components
from .errors import CylStableError
from .experiments import EXPERIMENTS, ExperimentConfig, run_experiment
from .fraclap import fraclap_report
from .geometry import load_domain
from .heatkernel import bound_ratio_diagnostics, estimate_lambda1, estimate_pd
from .simulator import (
    Mesh,
    SimConfig,
    exit_distribution,
    mean_exit_time,
    occupation_green,
    refinement_study,
    simulate_path,
    survival_probability,
)
from .stable_core import AlphaParam
from .svg import Plot

SIM_COLUMNS = ("quantity", "estimate", "stderr", "dt", "n_paths", "seed")


def _point(text: str) -> list:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _pair(text: str) -> list:
    parts = text.split(";")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected 'x1,x2;y1,y2', got {text!r}")
    return [_point(p) for p in parts]


def _emit_json(obj, out) -> None:
    text = json.dumps(obj, indent=2, default=float) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _emit_csv(rows, columns, out) -> None:
    fh = open(out, "w", newline="") if out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([repr(r[c]) if isinstance(r[c], float) else r[c] for c in columns])
    finally:
        if out:
            fh.close()


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_experiment(args) -> int:
    if args.config:
        cfg = ExperimentConfig.from_json(args.config)
        if cfg.name != args.name:
            raise CylStableError(f"config is for {cfg.name!r}, not {args.name!r}")
        if args.out:
            cfg = replace(cfg, output_dir=args.out)
    else:
        cfg = ExperimentConfig(args.name, args.seed, output_dir=args.out or "results")
    report = run_experiment(cfg)
    for v in report.verdicts:
        print(f"{'PASS' if v.passed else 'FAIL'}  {v.criterion}  measured={json.dumps(v.measured, default=str)}")
    print(f"report: {Path(cfg.output_dir) / cfg.name / 'report.json'}")
    return 0 if report.passed else 1


def cmd_check_irreducible(args) -> int:
    dom = load_domain(args.domain)
    grid = rook_components(dom, args.h)
    _emit_json({"domain": dom.name, "h": grid.h, "n_components": grid.n_components,
                "irreducible": grid.n_components == 1, "grid_shape": list(grid.occupancy.shape)}, args.out)
    return 0


def cmd_check_hgamma(args) -> int:
    dom = load_domain(args.domain)
    rep = check_hgamma_domain(dom, args.gamma, args.pairs, seed=args.seed, h=args.h)
    _emit_json({"domain": dom.name, **rep.to_dict()}, args.out)
    return 0


def cmd_fraclap(args) -> int:
    _emit_json(fraclap_report(args.alpha, args.p, args.x), args.out)
    return 0


def _sim_setup(args):
    params = AlphaParam(args.alpha, args.dim)
    dom = load_domain(args.domain)
    cfg = SimConfig(dt=args.dt, t_end=args.t, n_paths=args.paths, seed=args.seed, workers=args.workers)
    return params, dom, cfg


def _with_refinement(args, quantity, estimator, cfg):
    """Rows for one scalar estimator, optionally over a dt-refinement ladder."""
    if args.refine and args.refine > 1:
        study = refinement_study(estimator, cfg, levels=args.refine)
        rows = [{**r, "n_paths": cfg.n_paths, "seed": cfg.seed} for r in study.to_rows(quantity)]
        rows.append({"quantity": f"{quantity}_richardson", "estimate": study.richardson, "stderr": float("nan"),
                     "dt": study.dts[-1], "n_paths": cfg.n_paths, "seed": cfg.seed})
        return rows
    e, s = estimator(cfg)
    return [{"quantity": quantity, "estimate": e, "stderr": s, "dt": cfg.dt, "n_paths": cfg.n_paths,
             "seed": cfg.seed}]


def _write_trace(args, params, dom, cfg):
    if args.trace:
        ps = simulate_path(params, args.x, cfg, 0, dom)
        np.save(args.trace, np.column_stack([ps.times, ps.states]))


def cmd_survival(args) -> int:
    params, dom, cfg = _sim_setup(args)
    rows = _with_refinement(args, "survival", lambda c: survival_probability(dom, params, args.x, args.t, c), cfg)
    _write_trace(args, params, dom, cfg)
    _emit_csv(rows, SIM_COLUMNS, args.out)
    return 0


def cmd_exit_time(args) -> int:
    params, dom, cfg = _sim_setup(args)
    rows = _with_refinement(args, "mean_exit_time", lambda c: mean_exit_time(dom, params, args.x, c), cfg)
    _write_trace(args, params, dom, cfg)
    _emit_csv(rows, SIM_COLUMNS, args.out)
    return 0


def _mesh(dom, h):
    lo, hi = dom.bbox
    return Mesh.covering(lo - 2.0, hi + 2.0, h)


def cmd_exit_dist(args) -> int:
    params, dom, cfg = _sim_setup(args)
    mesh = _mesh(dom, args.mesh_h)
    rec = exit_distribution(dom, params, args.x, cfg, mesh, until_exit=args.until_exit)
    n = rec.n_paths
    base = {"dt": cfg.dt, "n_paths": n, "seed": cfg.seed}
    frac = rec.n_exited / n
    rows = [{"quantity": "exit_fraction", "estimate": frac, "stderr": float(np.sqrt(frac * (1 - frac) / n)), **base},
            {"quantity": "outside_mesh_fraction", "estimate": rec.outside_mesh / n, "stderr": float("nan"), **base},
            {"quantity": "second_displacement_median", "estimate": rec.second_displacement_median,
             "stderr": float("nan"), **base}]
    centers = mesh.centers().reshape(-1, mesh.dim)
    counts = rec.counts.ravel()
    for c in np.nonzero(counts)[0]:
        p = counts[c] / n
        label = "exit_mass[" + ",".join(f"{v:.6g}" for v in centers[c]) + "]"
        rows.append({"quantity": label, "estimate": float(p), "stderr": float(np.sqrt(p * (1 - p) / n)), **base})
    _write_trace(args, params, dom, cfg)
    _emit_csv(rows, SIM_COLUMNS, args.out)
    return 0


def cmd_green(args) -> int:
    params, dom, cfg = _sim_setup(args)
    lo, hi = dom.bbox
    mesh = Mesh.covering(lo, hi, args.mesh_h)
    occ = occupation_green(dom, params, args.x, cfg, mesh, until_exit=True)
    base = {"dt": cfg.dt, "n_paths": occ.n_paths, "seed": cfg.seed}
    rows = [{"quantity": "total_occupation", "estimate": occ.total_mass, "stderr": float("nan"), **base}]
    centers = mesh.centers().reshape(-1, mesh.dim)
    g = occ.green.ravel()
    for c in np.nonzero(g)[0]:
        label = "green[" + ",".join(f"{v:.6g}" for v in centers[c]) + "]"
        rows.append({"quantity": label, "estimate": float(g[c]), "stderr": float("nan"), **base})
    _emit_csv(rows, SIM_COLUMNS, args.out)
    return 0


def cmd_heatkernel(args) -> int:
    params = AlphaParam(args.alpha, args.dim)
    dom = load_domain(args.domain)
    cfg = SimConfig(dt=args.dt, t_end=args.t, n_paths=args.paths, seed=args.seed, workers=args.workers)
    est = estimate_pd(args.method, dom, params, args.t, args.x, args.y, cfg, bandwidth=args.bandwidth)
    _emit_json({"value": est.value, "stderr": est.stderr, "method": est.method,
                "params": {"alpha": args.alpha, "dim": args.dim, "domain": dom.name, "t": args.t,
                           "x": args.x, "y": args.y, "dt": args.dt, "paths": args.paths, "seed": args.seed,
                           "bandwidth": est.bandwidth},
                "n_survivors": est.n_survivors, "sensitivity": est.sensitivity}, args.out)
    return 0


def _out_dir(args) -> Path:
    d = Path(args.out or ".")
    d.mkdir(parents=True, exist_ok=True)
    return d


def cmd_lambda1(args) -> int:
    params = AlphaParam(args.alpha, args.dim)
    dom = load_domain(args.domain)
    cfg = SimConfig(dt=args.dt, t_end=1.0, n_paths=args.paths, seed=args.seed, workers=args.workers)
    est = estimate_lambda1(dom, params, args.x, cfg, n_boot=args.boot)
    rows = [{"start": ",".join(map(repr, x)), "lambda1": lam, "stderr": se, "t_lo": lo, "t_hi": hi}
            for x, lam, se, lo, hi in est.per_start]
    rows.append({"start": "pooled", "lambda1": est.lambda1, "stderr": est.stderr,
                 "t_lo": min(r["t_lo"] for r in rows), "t_hi": max(r["t_hi"] for r in rows)})
    out = _out_dir(args)
    _emit_csv(rows, ("start", "lambda1", "stderr", "t_lo", "t_hi"), out / "lambda1.csv")
    plot = Plot(f"lambda_1 by start point: {dom.name}", "start index", "lambda_1")
    plot.add("per start", list(range(len(est.per_start))), [r["lambda1"] for r in rows[:-1]],
             [r["stderr"] for r in rows[:-1]], line=False)
    plot.hlines.append((est.lambda1, "pooled"))
    plot.save(out / "lambda1.svg")
    print(json.dumps({"lambda1": est.lambda1, "stderr": est.stderr, "csv": str(out / "lambda1.csv")}))
    return 0


def cmd_bound_ratio(args) -> int:
    params = AlphaParam(args.alpha, args.dim)
    dom = load_domain(args.domain)
    cfg = SimConfig(dt=args.dt, t_end=1.0, n_paths=args.paths, seed=args.seed, workers=args.workers)
    diag = bound_ratio_diagnostics(dom, params, args.times, args.pair, cfg, method=args.method)
    cols = ("t", "x", "y", "estimate", "stderr", "reference", "ratio", "delta_x", "delta_y")
    rows = [{**r, "x": ",".join(map(repr, r["x"])), "y": ",".join(map(repr, r["y"]))} for r in diag.rows]
    out = _out_dir(args)
    _emit_csv(rows, cols, out / "bound_ratio.csv")
    plot = Plot(f"p_D estimate / (w w p): {dom.name}", "t", "ratio", logx=True, logy=True)
    for x, y in args.pair:
        rr = [r for r in diag.rows if list(r["x"]) == x and list(r["y"]) == y]
        plot.add(f"{x} -> {y}", [r["t"] for r in rr], [max(r["ratio"], 1e-300) for r in rr])
    plot.save(out / "bound_ratio.svg")
    print(json.dumps({"ratio_min": diag.ratio_min, "ratio_max": diag.ratio_max, "band": diag.band,
                      "n_zero": diag.n_zero, "csv": str(out / "bound_ratio.csv")}, default=str))
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _sim_flags(p, t_default=1.0, need_t=True, with_x=True):
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--domain", default="disc", help="catalog id or JSON descriptor path")
    if with_x:
        p.add_argument("--x", type=_point, default=None, help="start point, comma-separated")
    if need_t:
        p.add_argument("--t", type=float, default=t_default)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--paths", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default=None)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cylstable", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("experiment", help="run a named experiment pipeline")
    p.add_argument("name", choices=sorted(EXPERIMENTS))
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--out", help="output directory (default: results)")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("check-irreducible", help="rook-class count of a domain")
    p.add_argument("--domain", required=True)
    p.add_argument("--h", type=float, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_check_irreducible)

    p = sub.add_parser("check-hgamma", help="search for (H_gamma) counterexamples")
    p.add_argument("--domain", required=True)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--pairs", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--h", type=float, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_check_hgamma)

    p = sub.add_parser("fraclap", help="fractional Laplacian of a one-sided power")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--x", type=float, default=1.0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_fraclap)

    for name, func in (("survival", cmd_survival), ("exit-time", cmd_exit_time)):
        p = sub.add_parser(name, help=f"{name} estimate (CSV)")
        _sim_flags(p)
        p.add_argument("--refine", type=int, default=0, help="number of dt levels (dt, dt/2, ..)")
        p.add_argument("--trace", default=None, help="write path 0 as a .npy array (time, coordinates)")
        p.set_defaults(func=func)

    p = sub.add_parser("exit-dist", help="exit-position histogram (CSV)")
    _sim_flags(p)
    p.add_argument("--mesh-h", type=float, default=0.25)
    p.add_argument("--until-exit", action="store_true")
    p.add_argument("--trace", default=None)
    p.set_defaults(func=cmd_exit_dist)

    p = sub.add_parser("green", help="occupation-measure Green function (CSV)")
    _sim_flags(p)
    p.add_argument("--mesh-h", type=float, default=0.1)
    p.set_defaults(func=cmd_green)

    p = sub.add_parser("heatkernel", help="Dirichlet heat kernel estimate (JSON)")
    _sim_flags(p)
    p.add_argument("--method", choices=("kde", "bridge", "sub"), default="kde")
    p.add_argument("--y", type=_point, required=True)
    p.add_argument("--bandwidth", type=float, default=None)
    p.set_defaults(func=cmd_heatkernel)

    p = sub.add_parser("lambda1", help="principal eigenvalue fit (CSV + SVG)")
    _sim_flags(p, need_t=False, with_x=False)
    p.add_argument("--start", dest="x", type=_point, action="append", help="start point; repeatable")
    p.add_argument("--boot", type=int, default=200)
    p.set_defaults(func=cmd_lambda1)

    p = sub.add_parser("bound-ratio", help="two-sided bound ratios (CSV + SVG)")
    _sim_flags(p, need_t=False, with_x=False)
    p.add_argument("--times", type=_point, required=True, help="comma-separated times")
    p.add_argument("--pair", type=_pair, action="append", required=True, help="'x1,x2;y1,y2'; repeatable")
    p.add_argument("--method", choices=("bridge", "survivor_kde", "subtraction"), default="bridge")
    p.set_defaults(func=cmd_bound_ratio)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "x", "n/a") is None and args.command not in ("lambda1",):
        dim = getattr(args, "dim", 2)
        args.x = [0.0] * dim
    if args.command == "lambda1" and not args.x:
        args.x = [[0.0] * args.dim]
    try:
        return args.func(args)
    except CylStableError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except BrokenPipeError:
        # reader went away (e.g. `| head`); silence the flush at interpreter exit
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return 0


if __name__ == "__main__":
    sys.exit(main())
