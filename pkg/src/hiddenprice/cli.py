"""Command-line front end.

Every subcommand prints JSON by default (``--format csv`` for tables).
Options can also come from a TOML or JSON file given with ``--config``:
top-level keys set global options and a table named after the subcommand
sets its options; flags on the command line win.

Exit codes: 0 success, 2 usage or parse error, 3 domain error,
4 infeasible certificate.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import bounds as BD
from . import distributions as D
from . import hiddenlp as H
from . import mechanisms as M
from . import reduction as R
from .errors import DivergentPayment, DivergentStatistic, DomainError, HiddenPriceError
from .numerics import Tolerances

EXIT_PARSE = 2
EXIT_DOMAIN = 3
EXIT_INFEASIBLE = 4
JOBS_ENV = "HIDDENPRICE_JOBS"


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    tolerances: Tolerances = field(default_factory=Tolerances)
    grid: H.GridSpec = H.COARSE
    seed: int = 0
    output_format: str = "json"
    profile: str = "coarse"
    jobs: int = 1

    def __post_init__(self):
        if self.profile not in H.PROFILES:
            raise UsageError(f"unknown profile {self.profile!r}")
        if self.output_format not in ("json", "csv"):
            raise UsageError(f"unknown output format {self.output_format!r}")

    def to_dict(self) -> dict:
        return {
            "tolerances": dict(self.tolerances.__dict__),
            "grid": self.grid.to_dict(),
            "seed": self.seed,
            "profile": self.profile,
        }


# ---------------------------------------------------------------------------
# output helpers


def _clean(obj):
    if isinstance(obj, float):
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        if math.isnan(obj):
            return "nan"
        return obj
    if isinstance(obj, (np.floating,)):
        return _clean(float(obj))
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def _emit(args, payload: dict, table: Optional[list] = None):
    if args.format == "csv" and table is not None:
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerows(table)
        text = buf.getvalue()
    else:
        text = json.dumps(_clean(payload), indent=2, sort_keys=True) + "\n"
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load_config(path: str) -> dict:
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    try:
        if path.endswith(".toml"):
            try:
                import tomllib
            except ModuleNotFoundError:  # Python < 3.11
                import tomli as tomllib
            return tomllib.loads(raw.decode())
        return json.loads(raw)
    except ValueError as exc:
        raise UsageError(f"cannot parse config {path}: {exc}") from None


def _run_config(args) -> RunConfig:
    tol = Tolerances(
        root_abs=args.root_abs, quad_abs=args.quad_abs, lp_feas=args.lp_feas, opt_rel=args.opt_rel
    )
    grid = H.PROFILES[args.profile]
    overrides = {k: getattr(args, k) for k in ("delta_a", "delta_lambda", "delta_b", "a_max", "b_max")
                 if getattr(args, k, None) is not None}
    if overrides:
        if args.profile == "fine":
            raise UsageError("the fine profile fixes the grid; drop the grid overrides")
        grid = H.GridSpec(**{**grid.to_dict(), **overrides})
    return RunConfig(tol, grid, args.seed, args.format, args.profile, args.jobs)


def _require_long(args, estimate: str):
    if args.profile == "fine":
        sys.stderr.write(f"warning: full-resolution run, estimated runtime {estimate}\n")
        if not args.long:
            raise UsageError("the fine profile is long-running; pass --long to proceed")


# ---------------------------------------------------------------------------
# distribution arguments


def _add_dist_args(p):
    p.add_argument("--dist-json", help="distribution as a JSON object or @file")
    p.add_argument("--kind", choices=["check", "hat", "uniform"])
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--a", type=float)
    p.add_argument("--b", type=float)


def _dist_from_args(args):
    if args.dist_json:
        text = args.dist_json
        if text.startswith("@"):
            with open(text[1:]) as fh:
                text = fh.read()
        try:
            return D.dist_from_dict(json.loads(text))
        except ValueError as exc:
            if isinstance(exc, DomainError):
                raise
            raise UsageError(f"cannot parse distribution JSON: {exc}") from None
    if args.kind is None:
        raise UsageError("give --dist-json or --kind with its parameters")
    try:
        if args.kind == "check":
            return D.CheckDist(args.alpha, args.lam, args.a)
        if args.kind == "hat":
            return D.HatDist(args.alpha, args.lam, args.b)
        return D.UniformDist(args.a, args.b)
    except TypeError:
        raise UsageError(f"missing parameters for a {args.kind} distribution") from None


# ---------------------------------------------------------------------------
# subcommands

# checked after parsing so that a config file can supply them
REQUIRED = {
    "dist": ("stat",),
    "optimize": ("stat",),
    "sweep": ("kind", "start", "stop", "step"),
    "simulate": ("rule",),
}

DIST_STATS = ("survival", "revenue", "mean", "lnorm", "var", "cvar", "opt", "interval")


def cmd_dist(args, cfg: RunConfig):
    dist = _dist_from_args(args)
    out = {"dist": D.dist_to_dict(dist)}
    for stat in args.stat:
        if stat == "survival":
            _need(args, "v")
            out["survival"] = {"v": args.v, "value": D.survival_at_or_above(dist, args.v)}
        elif stat == "revenue":
            _need(args, "p")
            out["revenue"] = {"p": args.p, "value": D.revenue(dist, args.p)}
        elif stat == "mean":
            out["mean"] = D.mean(dist)
        elif stat == "lnorm":
            _need(args, "eta")
            out["lnorm"] = {"eta": args.eta, "value": D.lnorm(dist, args.eta)}
        elif stat == "var":
            _need(args, "q")
            out["var"] = {"q": args.q, "value": D.var_q(dist, args.q)}
        elif stat == "cvar":
            _need(args, "q")
            out["cvar"] = {"q": args.q, "value": D.cvar_q(dist, args.q)}
        elif stat == "opt":
            p, opt = D.opt_price(dist)
            out["opt"] = {"p_star": p, "opt": opt}
        elif stat == "interval":
            _need(args, "gamma")
            out["interval"] = D.critical_interval(dist, args.gamma, cfg.tolerances).to_dict()
    _emit(args, out)


def _need(args, name):
    if getattr(args, name) is None:
        raise UsageError(f"--{name.replace('_', '-')} is required here")


def _search_config(args, cfg: RunConfig) -> R.SearchConfig:
    return R.SearchConfig(t_step=args.t_step, omega_step=args.omega_step, tol=cfg.tolerances,
                          hat_lambda_max=args.hat_lambda_max)


def cmd_optimize(args, cfg: RunConfig):
    stat = R.parse_statistic(args.stat, args.eta, args.q)
    scfg = _search_config(args, cfg)
    res = R.optimize_discount(stat, args.alpha, scfg)
    row = res.to_dict()
    table = [("statistic", "alpha", "omega", "gamma", "worst_family", "worst_lambda", "worst_loc"),
             (res.statistic, res.alpha, res.omega, res.gamma, res.worst_family, res.worst_lambda,
              res.worst_loc)]
    _emit(args, {"result": row, "statistic": R.statistic_to_dict(stat),
                 "search": {"t_step": scfg.t_step, "omega_step": scfg.omega_step,
                            "hat_lambda_max": scfg.hat_lambda_max}}, table)


def cmd_sweep(args, cfg: RunConfig):
    n = int(round((args.stop - args.start) / args.step)) + 1
    grid = [round(args.start + k * args.step, 12) for k in range(n)]
    scfg = _search_config(args, cfg)
    table = R.sweep_parameter(args.kind, grid, args.alpha, scfg, jobs=cfg.jobs)
    rows = table.to_csv_rows()
    payload = {
        "kind": args.kind,
        "alpha": args.alpha,
        "argmax": table.argmax,
        "rows": [dict(zip(rows[0], r)) for r in rows[1:]],
    }
    _emit(args, payload, rows)


def cmd_verify_gamma(args, cfg: RunConfig):
    _require_long(args, "several hours")
    if args.search:
        gamma = H.max_certified_gamma(cfg.grid, args.search_lo, args.search_hi, args.search_tol,
                                      jobs=cfg.jobs)
        _emit(args, {"max_certified_gamma": gamma, "grid": cfg.grid.to_dict(),
                     "tolerance": args.search_tol})
        return 0
    t0 = time.perf_counter()
    rep = H.verify_gamma(args.gamma, cfg.grid, cfg.tolerances, jobs=cfg.jobs)
    sys.stderr.write(f"verify-gamma finished in {time.perf_counter() - t0:.1f}s\n")
    if args.rules_dir:
        os.makedirs(args.rules_dir, exist_ok=True)
        for j, rule in rep.rules().items():
            with open(os.path.join(args.rules_dir, f"rule_j{j:04d}.csv"), "w", newline="") as fh:
                csv.writer(fh, lineterminator="\n").writerows(rule.to_csv_rows())
    table = [("j", "b", "b_prev", "min_expectation", "ub", "slack", "feasible")]
    table += [(r.j, r.b, r.b_prev, r.min_expectation, r.ub, r.slack, r.feasible)
              for r in rep.records]
    payload = rep.to_dict()
    payload.pop("runtime_s", None)  # keep reruns byte-identical
    _emit(args, payload, table)
    return 0 if rep.feasible else EXIT_INFEASIBLE


def cmd_dual_bound(args, cfg: RunConfig):
    _require_long(args, "tens of minutes")
    w = H.dual_lp_bound(args.gamma, args.b, cfg.grid, a_cap=args.a_cap, tol=cfg.tolerances)
    table = [("lambda", "a", "weight")] + [tuple(k) for k in w.K]
    _emit(args, w.to_dict(), table)


def cmd_bounds(args, cfg: RunConfig):
    out = {}
    table = None
    if args.uniform:
        out["uniform"] = BD.uniform_upper().to_dict()
    if args.concave:
        out["concave"] = BD.concave_upper(args.alpha, args.lam, args.b, cfg.tolerances).to_dict()
    if args.curve:
        n = int(round(1.0 / args.alpha_step)) + 1
        rows = BD.upper_bound_curve([round(k * args.alpha_step, 12) for k in range(n)])
        table = [("alpha", "bound", "c_star")] + rows
        out["curve"] = [dict(zip(table[0], r)) for r in rows]
    if not (args.uniform or args.concave or args.curve) or args.gamma_alpha:
        out["gamma_alpha"] = {"alpha": args.alpha, **BD.gamma_alpha_upper(args.alpha).to_dict()}
    _emit(args, out, table)


def _rule_from_args(args):
    if args.rule == "mean":
        return M.MeanRule(args.omega)
    if args.rule == "lnorm":
        _need(args, "eta")
        return M.LNormRule(args.omega, args.eta)
    if args.rule == "cvar":
        _need(args, "q")
        return M.CVaRRule(args.omega, args.q)
    return M.UniformRule()


def cmd_simulate(args, cfg: RunConfig):
    dist = _dist_from_args(args)
    rule = _rule_from_args(args)
    rep = M.simulate_mechanism(rule, dist, n=args.n, seed=cfg.seed)
    _emit(args, {"dist": D.dist_to_dict(dist), "rule": {"kind": args.rule, "omega": args.omega,
                 "eta": args.eta, "q": args.q}, "report": rep.to_dict()})


def cmd_uniform(args, cfg: RunConfig):
    if args.scan:
        ratio, argmin = M.uniform_worst(args.step)
        _emit(args, {"min_ratio": ratio, "argmin": argmin, "step": args.step},
              [("a", "ratio")] + [(a, float(M.uniform_mechanism_ratio(a, 1.0))) for a in argmin])
        return 0
    _need(args, "a")
    _need(args, "b")
    r = M.uniform_mechanism_ratio(args.a, args.b)
    _emit(args, {"a": args.a, "b": args.b, "ratio": float(r)})
    return 0


# ---------------------------------------------------------------------------
# parser


def _add_global_args(p, suppress: bool):
    def d(value):
        return argparse.SUPPRESS if suppress else value

    p.add_argument("--config", default=d(None), help="TOML or JSON config file")
    p.add_argument("--format", choices=["json", "csv"], default=d("json"))
    p.add_argument("--output", default=d(None), help="write output here instead of stdout")
    p.add_argument("--profile", choices=sorted(H.PROFILES), default=d("coarse"))
    p.add_argument("--long", action="store_true", default=d(False),
                   help="acknowledge long-running profiles")
    p.add_argument("--jobs", type=int, default=d(int(os.environ.get(JOBS_ENV, "1"))))
    p.add_argument("--seed", type=int, default=d(0))
    p.add_argument("--root-abs", type=float, default=d(1e-10))
    p.add_argument("--quad-abs", type=float, default=d(1e-10))
    p.add_argument("--lp-feas", type=float, default=d(1e-9))
    p.add_argument("--opt-rel", type=float, default=d(1e-6))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hiddenprice", description=__doc__.split("\n")[0])
    _add_global_args(parser, suppress=False)
    # the same options are accepted after the subcommand name
    common = argparse.ArgumentParser(add_help=False)
    _add_global_args(common, suppress=True)
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("dist", parents=[common],
                       help="statistics of one distribution")
    _add_dist_args(p)
    p.add_argument("--stat", action="append", choices=DIST_STATS)
    p.add_argument("--v", type=float)
    p.add_argument("--p", type=float)
    p.add_argument("--eta", type=float)
    p.add_argument("--q", type=float)
    p.add_argument("--gamma", type=float)
    p.set_defaults(func=cmd_dist)

    def search_args(p):
        p.add_argument("--alpha", type=float, default=1.0)
        p.add_argument("--t-step", type=float, default=1e-3)
        p.add_argument("--omega-step", type=float, default=1e-3)
        p.add_argument("--hat-lambda-max", type=float, default=1e3)

    p = sub.add_parser("optimize", parents=[common],
                       help="optimal discount for a statistic")
    p.add_argument("--stat", choices=["mean", "lnorm", "cvar", "var"])
    p.add_argument("--eta", type=float)
    p.add_argument("--q", type=float)
    search_args(p)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("sweep", parents=[common],
                       help="optimal discount along a parameter grid")
    p.add_argument("--kind", choices=["lnorm", "cvar"])
    p.add_argument("--start", type=float)
    p.add_argument("--stop", type=float)
    p.add_argument("--step", type=float)
    search_args(p)
    p.set_defaults(func=cmd_sweep)

    def grid_args(p):
        p.add_argument("--delta-a", type=float)
        p.add_argument("--delta-lambda", type=float)
        p.add_argument("--delta-b", type=float)
        p.add_argument("--a-max", type=float)
        p.add_argument("--b-max", type=float)

    p = sub.add_parser("verify-gamma", parents=[common],
                       help="certify a ratio with the discretized LPs")
    p.add_argument("--gamma", type=float, default=0.76)
    p.add_argument("--search", action="store_true", help="bisect for the largest certified ratio")
    p.add_argument("--search-lo", type=float, default=0.5)
    p.add_argument("--search-hi", type=float, default=0.8)
    p.add_argument("--search-tol", type=float, default=1e-4)
    p.add_argument("--rules-dir", help="write each certified rule as CSV here")
    grid_args(p)
    p.set_defaults(func=cmd_verify_gamma)

    p = sub.add_parser("dual-bound", parents=[common],
                       help="upper bound from the dual mixture program")
    p.add_argument("--gamma", type=float, default=0.796)
    p.add_argument("--b", type=float, default=1.95)
    p.add_argument("--a-cap", type=float, default=8.0)
    grid_args(p)
    p.set_defaults(func=cmd_dual_bound)

    p = sub.add_parser("bounds", parents=[common],
                       help="impossibility bounds")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--gamma-alpha", action="store_true")
    p.add_argument("--uniform", action="store_true")
    p.add_argument("--concave", action="store_true")
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--b", type=float, default=1.7)
    p.add_argument("--curve", action="store_true")
    p.add_argument("--alpha-step", type=float, default=0.05)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("simulate", parents=[common],
                       help="Monte Carlo check of a hidden pricing rule")
    _add_dist_args(p)
    p.add_argument("--rule", choices=["mean", "lnorm", "cvar", "uniform"])
    p.add_argument("--omega", type=float, default=1.0)
    p.add_argument("--eta", type=float)
    p.add_argument("--q", type=float)
    p.add_argument("--n", type=int, default=1_000_000)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("uniform", parents=[common],
                       help="the 7/8 mechanism on uniform distributions")
    p.add_argument("--scan", action="store_true")
    p.add_argument("--step", type=float, default=1e-4)
    p.add_argument("--a", type=float)
    p.add_argument("--b", type=float)
    p.set_defaults(func=cmd_uniform)
    return parser


def _apply_config(parser, argv):
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    conf = _load_config(known.config)
    subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    top = {k: v for k, v in conf.items() if not isinstance(v, dict)}
    parser.set_defaults(**_config_dests(parser, top))
    for name, sp in subparsers.choices.items():
        section = conf.get(name)
        if isinstance(section, dict):
            sp.set_defaults(**_config_dests(sp, section))


def _config_dests(parser, section: dict) -> dict:
    """Map config keys, spelled like the long flags, onto argparse destinations."""
    by_flag = {}
    for action in parser._actions:
        for opt in action.option_strings:
            if opt.startswith("--"):
                by_flag[opt[2:]] = action.dest
    out = {}
    for key, value in section.items():
        flag = key.replace("_", "-")
        out[by_flag.get(flag, key.replace("-", "_"))] = value
    return out


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
    except UsageError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_PARSE
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        for name in REQUIRED.get(args.command, ()):
            _need(args, name)
        cfg = _run_config(args)
        code = args.func(args, cfg)
        return int(code or 0)
    except UsageError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_PARSE
    except (DomainError, DivergentStatistic, DivergentPayment) as exc:
        sys.stderr.write(f"domain error: {exc}\n")
        return EXIT_DOMAIN
    except HiddenPriceError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
