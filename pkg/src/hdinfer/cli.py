"""Command line entry point: ``hdinfer {fit,ci,simulate,diagnose}``.

Coordinates are 0-based column indices of the design (response excluded).
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from .bootstrap import bootstrap_debiased_many, ddb_estimate, ddb_plugin_ci, percentile_ci
from .core import SeedSpec, destandardize_coefficients, read_csv, standardize
from .debias import debias, estimate_sigma, nodewise_direction, plugin_ci
from .diagnostics import condition_report, population_condition_report
from .errors import HDInferError
from .lasso import SolverConfig, fit_lasso, fit_lasso_pipeline, universal_lambda
from .simharness import emit_report, generate_instance, load_config, run_simulation


def _load(args):
    data, names = read_csv(args.data, args.response, header=not args.no_header)
    if args.standardize:
        data = standardize(data)
    return data, names


def _fit(data, args, config):
    if args.lam is not None:
        fit = fit_lasso(data, args.lam, config)
    elif args.sigma is not None:
        fit = fit_lasso(data, universal_lambda(data, args.sigma), config)
    else:
        fit, _ = fit_lasso_pipeline(data, config)
    return fit, estimate_sigma(data, fit)


def _ints(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t.strip()]


def cmd_fit(args) -> int:
    data, names = _load(args)
    fit, sigma2 = _fit(data, args, SolverConfig())
    coef = destandardize_coefficients(fit.beta_hat, data.column_scales)
    out = {
        "lambda": fit.lam,
        "sigma_hat": math.sqrt(sigma2),
        "support": [int(j) for j in fit.active_set],
        "coefficients": {names[j]: float(coef[j]) for j in fit.active_set},
        "kkt_gap": fit.kkt_gap,
        "converged": fit.converged,
        "sweeps": fit.iterations,
    }
    if args.json:
        print(json.dumps(out, indent=2))
    else:
        print(f"lambda      {fit.lam:.6g}")
        print(f"sigma_hat   {out['sigma_hat']:.6g}")
        print(f"support     {len(fit.active_set)} of {data.p}")
        for name, v in out["coefficients"].items():
            print(f"  {name:<12} {v: .6g}")
    return 0


def cmd_ci(args) -> int:
    data, names = _load(args)
    config = SolverConfig()
    fit, sigma2 = _fit(data, args, config)
    sigma_hat = math.sqrt(sigma2)
    lam_j = args.lambda_j if args.lambda_j is not None else fit.lam
    arts = [nodewise_direction(data, j, lam_j, config) for j in _ints(args.coord)]
    dists = None
    if args.method in ("bsdb", "ddb"):
        dists = bootstrap_debiased_many(
            data, fit, sigma_hat, arts, args.boot, SeedSpec(args.seed), config
        )
    rows = []
    for k, art in enumerate(arts):
        est = debias(data, fit, art)
        if args.method == "db":
            ci, point = plugin_ci(est, art, sigma_hat, 1 - args.level), est.beta_db
        elif args.method == "bsdb":
            ci, point = percentile_ci(est.beta_db, dists[k], args.level), est.beta_db
        else:
            point = ddb_estimate(est.beta_db, dists[k])
            ci = ddb_plugin_ci(point, art, sigma_hat, args.level)
        scale = data.column_scales[art.j]
        rows.append({
            "coord": art.j, "name": names[art.j], "method": ci.method,
            "estimate": point * scale, "lower": ci.lower * scale,
            "upper": ci.upper * scale, "level": ci.level,
        })
    if args.json:
        print(json.dumps(rows, indent=2))
    else:
        print(f"{'coord':>5} {'name':<12} {'estimate':>11} {'lower':>11} {'upper':>11}")
        for r in rows:
            print(f"{r['coord']:>5} {r['name']:<12} {r['estimate']:>11.5g} "
                  f"{r['lower']:>11.5g} {r['upper']:>11.5g}")
    return 0


def cmd_simulate(args) -> int:
    cfg = load_config(args.config, n_reps=args.reps, B=args.boot, master_seed=args.seed)
    report, _ = run_simulation(cfg, threads=args.threads)
    blob = emit_report(report, args.format)
    if args.out == "-":
        sys.stdout.write(blob.decode())
    else:
        with open(args.out, "wb") as fh:
            fh.write(blob)
    return 0


def cmd_diagnose(args) -> int:
    if args.config:
        cfg = load_config(args.config, master_seed=args.seed)
        data, beta, _ = generate_instance(cfg, args.rep)
        lam = universal_lambda(data, cfg.noise_sigma, cfg.lambda_multiplier)
        support = np.flatnonzero(beta)
        sigma = cfg.noise_sigma
        population = population_condition_report(
            cfg.covariance(), support, beta, lam, cfg.n, sigma,
            j=args.coord if args.coord is not None else None,
        )
    else:
        if not (args.data and args.response is not None and args.support):
            raise HDInferError("diagnose needs --config, or a CSV with --response and --support")
        data, _ = _load(args)
        support = np.array(_ints(args.support))
        beta = np.zeros(data.p)
        beta[support] = [float(t) for t in args.beta.split(",")] if args.beta else 1.0
        fit, sigma2 = _fit(data, args, SolverConfig())
        lam = fit.lam
        sigma = args.sigma if args.sigma is not None else math.sqrt(sigma2)
        population = None
    art = None
    if args.coord is not None:
        art = nodewise_direction(data, args.coord, lam)
    sample = condition_report(data, support, art, beta, lam, sigma)
    if args.json:
        out = {"sample": sample.to_dict()}
        if population is not None:
            out["population"] = population.to_dict()
        print(json.dumps(out, indent=2))
    else:
        print("[sample]")
        sys.stdout.write(sample.to_text())
        if population is not None:
            print("[population]")
            sys.stdout.write(population.to_text())
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hdinfer", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    def data_args(p, required=True):
        p.add_argument("data", nargs=None if required else "?")
        p.add_argument("--response", required=required,
                       help="response column name or 0-based index")
        p.add_argument("--no-header", action="store_true")
        p.add_argument("--standardize", action="store_true",
                       help="rescale columns to squared norm n before fitting")
        p.add_argument("--lambda", dest="lam", type=float,
                       help="fixed penalty (default: two-stage universal level)")
        p.add_argument("--sigma", type=float,
                       help="known noise level for the universal penalty")
        p.add_argument("--json", action="store_true")

    p = sub.add_parser("fit", help="Lasso fit and sigma_hat")
    data_args(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("ci", help="confidence intervals for single coordinates")
    data_args(p)
    p.add_argument("--coord", required=True, help="comma-separated 0-based columns")
    p.add_argument("--method", choices=("bsdb", "db", "ddb"), default="bsdb")
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--boot", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lambda-j", type=float, help="nodewise penalty (default: lambda)")
    p.set_defaults(func=cmd_ci)

    p = sub.add_parser("simulate", help="Monte-Carlo coverage study")
    p.add_argument("--config", required=True)
    p.add_argument("--reps", type=int)
    p.add_argument("--boot", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int, help="worker processes (default: $HDINFER_THREADS)")
    p.add_argument("--out", required=True, help="output path, or - for stdout")
    p.add_argument("--format", choices=("table", "csv", "json"), default="table")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("diagnose", help="design condition report")
    data_args(p, required=False)
    p.add_argument("--config", help="simulation config; diagnoses replication --rep")
    p.add_argument("--rep", type=int, default=0)
    p.add_argument("--seed", type=int)
    p.add_argument("--support", help="comma-separated true support (CSV mode)")
    p.add_argument("--beta", help="coefficients on --support (CSV mode, default 1)")
    p.add_argument("--coord", type=int, help="also report z_j regularity for this column")
    p.set_defaults(func=cmd_diagnose)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (HDInferError, OSError) as exc:
        print(f"hdinfer: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
