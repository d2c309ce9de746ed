"""Command line entry point: ``mmstruct {calibrate,fit,influence,breakdown,simulate}``.

Every subcommand prints JSON on stdout.
"""
import argparse
import csv
import json
import sys
from types import SimpleNamespace

import numpy as np

from .covariance import CovarianceStructure
from .data import load_csv
from .diagnostics import AsymptoticReport, asymptotic_covariance, influence_function
from .exceptions import MMError
from .initial import InitialConfig, initial_fit
from .mm import MMConfig, fit_mm
from .rho import RhoFunction, calibrate_breakdown, calibrate_efficiency, calibrate_winsorize
from .robustness import (SweepConfig, YShift, breakdown_bound, contamination_sweep,
                         scenario_grid, write_sweep_csv)
from .simulation import EstimatorConfig, GeneratorSpec, run_monte_carlo


def _json_arg(text):
    """Inline JSON or a path to a JSON file."""
    if text.lstrip().startswith("{"):
        return json.loads(text)
    with open(text) as fh:
        return json.load(fh)


def _emit(obj, path=None):
    text = json.dumps(obj, indent=2, default=float)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _rho1(args, k):
    if args.rho1_cutoff is not None:
        return RhoFunction(args.rho1, args.rho1_cutoff, k)
    return calibrate_efficiency(args.rho1, k, args.rho1_efficiency).rho


def _add_fit_args(p):
    p.add_argument("--data", required=True, help="long-format CSV: subject,row,y,x1,...")
    p.add_argument("--structure", required=True, type=_json_arg,
                   help='JSON file or inline JSON, e.g. \'{"kind": "ar1", "k": 3}\'')
    p.add_argument("--rho0-breakdown", dest="r0", type=float, default=0.5)
    p.add_argument("--rho1", choices=("biweight", "huber"), default="biweight")
    p.add_argument("--rho1-efficiency", type=float, default=0.95)
    p.add_argument("--rho1-cutoff", type=float, default=None,
                   help="use this cut-off instead of calibrating to --rho1-efficiency")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-subsets", type=int, default=500)
    p.add_argument("--n-concentration", type=int, default=10)


def cmd_calibrate(args):
    if args.breakdown is not None:
        res = calibrate_breakdown(args.family, args.dim, args.breakdown)
    elif args.efficiency is not None:
        res = calibrate_efficiency(args.family, args.dim, args.efficiency)
    else:
        if args.family != "huber":
            raise MMError("--winsorize calibrates the Huber cut-off")
        res = calibrate_winsorize(args.dim, args.winsorize)
    _emit(res.to_dict())


def cmd_fit(args):
    sample = load_csv(args.data)
    structure = CovarianceStructure.from_dict(args.structure)
    rho0 = calibrate_breakdown("biweight", sample.k, args.r0).rho
    rho1 = _rho1(args, sample.k)
    icfg = InitialConfig(seed=args.seed, n_subsets=args.n_subsets,
                         n_concentration=args.n_concentration, r0=args.r0)
    init = initial_fit(sample, structure, rho0, None, icfg)
    fit = fit_mm(sample, init, rho1, MMConfig(seed=args.seed))
    fit.report = asymptotic_covariance(fit, sample, rho1)
    out = fit.to_dict()
    out["sample"] = sample.describe()
    out["structure"] = structure.to_dict()
    _emit(out, args.out)


def cmd_influence(args):
    with open(args.fit) as fh:
        d = json.load(fh)
    if "asymptotics" not in d:
        raise MMError("the fit report has no asymptotics section")
    fit = SimpleNamespace(beta1=np.asarray(d["beta1"]), V0=np.asarray(d["initial"]["V0"]),
                          rho1=RhoFunction.from_dict(d["rho1"]))
    report = AsymptoticReport.from_dict(d["asymptotics"])
    points = load_csv(args.point)
    ifs = [influence_function(fit, report, points.y[i], points.X[i]).tolist()
           for i in range(points.n)]
    _emit(ifs[0] if len(ifs) == 1 else ifs)


def cmd_breakdown(args):
    sample = load_csv(args.data)
    structure = CovarianceStructure.from_dict(args.structure)
    rho0 = calibrate_breakdown("biweight", sample.k, args.r0).rho
    rho1 = _rho1(args, sample.k)
    fractions = [float(f) for f in args.grid.split(",") if f.strip()]
    icfg = InitialConfig(seed=args.seed, n_subsets=args.n_subsets,
                         n_concentration=args.n_concentration, r0=args.r0)
    rows = contamination_sweep(sample, structure, rho0, rho1,
                               scenario_grid(sample.n, fractions, YShift(), args.seed),
                               SweepConfig(icfg, MMConfig(strict=False, seed=args.seed)))
    if args.out:
        write_sweep_csv(rows, args.out)
    else:
        w = csv.writer(sys.stderr)
        w.writerow(["m_over_n", "magnitude", "beta_dev", "v_dist", "exploded"])
        for r in rows:
            w.writerow([r["m_over_n"], r["magnitude"], r["beta_dev"], r["v_dist"], r["exploded"]])
    _emit(breakdown_bound(sample, args.r0).to_dict())


def cmd_simulate(args):
    d = _json_arg(args.spec)
    spec = GeneratorSpec.from_dict(d)
    est = EstimatorConfig.from_dict(d.get("estimator", {}))
    report = run_monte_carlo(spec, est, args.reps, consistency=args.consistency,
                             n_jobs=args.jobs)
    _emit(report.to_dict(), args.out)
    if args.table:
        rows = report.table()
        with open(args.table, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)


def build_parser():
    parser = argparse.ArgumentParser(prog="mmstruct", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("calibrate", help="tune a rho cut-off")
    p.add_argument("--family", choices=("biweight", "huber"), required=True)
    p.add_argument("--dim", type=int, required=True, help="response dimension k")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--breakdown", type=float)
    g.add_argument("--efficiency", type=float)
    g.add_argument("--winsorize", type=float)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("fit", help="two-stage fit of a long-format CSV")
    _add_fit_args(p)
    p.add_argument("--out", help="write the JSON report here instead of stdout")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("influence", help="influence function at new points")
    p.add_argument("--fit", required=True, help="JSON written by `fit`")
    p.add_argument("--point", required=True, help="long-format CSV with one or more subjects")
    p.set_defaults(func=cmd_influence)

    p = sub.add_parser("breakdown", help="breakdown bound and contamination sweep")
    _add_fit_args(p)
    p.set_defaults(r0=0.5)
    p.add_argument("--r0", dest="r0", type=float)
    p.add_argument("--grid", default="0.0,0.1,0.2,0.3,0.4")
    p.add_argument("--out", help="CSV path for the sweep table (stderr if omitted)")
    p.set_defaults(func=cmd_breakdown)

    p = sub.add_parser("simulate", help="Monte Carlo experiment")
    p.add_argument("--spec", required=True,
                   help="generator JSON; an optional 'estimator' key tunes the fit")
    p.add_argument("--reps", type=int, required=True)
    p.add_argument("--out", help="report JSON path (stdout if omitted)")
    p.add_argument("--table", help="per-replication CSV")
    p.add_argument("--consistency", action="store_true",
                   help="also estimate the log-RMSE slope over n = 100, 400, 1600")
    p.add_argument("--jobs", type=int, default=None)
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (MMError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0
