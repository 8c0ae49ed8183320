"""Command-line entry point ``upe``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure. Errors are printed to stderr as one JSON object.
"""
from __future__ import annotations

import argparse
import json
import sys
import warnings
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import mc, report
from .cdf_model import BasisSpec
from .data import MIN_ESTIMATION_ROWS, ingest_csv
from .effects import PolicySpec, estimate_location_scale, estimate_simultaneous, fit_tau
from .errors import ConfigError, DataError, NumericalError, UpeError
from .inference import effect_confidence_intervals, influence_rows, scale_effect_ttest
from .numerics import KernelSpec, LinkKind
from .oracle import brute_force_effect, closed_form_effects, stein_check
from .synth import PROFILES as SYNTH_PROFILES
from .synth import generate

ORACLE_FLOOR = 5e-3
STEIN_LIMIT = 1e-8


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _names(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _links(text: str) -> list[str]:
    names = _names(text)
    for name in names:
        if name not in {k.value for k in LinkKind}:
            raise argparse.ArgumentTypeError(f"unknown link {name!r}")
    return names


# --------------------------------------------------------------------- estimate

def _policy_from_args(args, x_mean: float) -> PolicySpec:
    try:
        if args.simultaneous:
            if args.ldot is None or len(args.ldot) != 2:
                raise ConfigError("--simultaneous needs --ldot a,b")
            return PolicySpec(ldot_vec=tuple(args.ldot))
        mu = x_mean if args.mu is None else args.mu
        return PolicySpec(ldot0=args.ldot0, sdot0=args.sdot0, mu=mu)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _estimate_one(data, policy, tau, link, basis, kernel, args):
    fit = fit_tau(data, tau, link, basis, kernel, log_outcome=args.log_outcome)
    base = {"tau": tau, "link": link.value, "q_hat": fit.q_hat, "f_hat": fit.f_hat,
            "bandwidth": fit.kernel.bandwidth}
    if policy.simultaneous:
        est = estimate_simultaneous(data, policy, tau, fit=fit)
    else:
        est = estimate_location_scale(data, policy, tau, fit=fit)
    comp = influence_rows(est, policy, strict_indicator=args.strict_indicator)
    cis = effect_confidence_intervals(comp, est, args.level)
    test = None if policy.simultaneous else scale_effect_ttest(est, policy, comp)
    rows = []
    for name, ci in cis.items():
        row = dict(base, effect=name, mu=None if policy.simultaneous else policy.mu,
                   point=ci.estimate, se=ci.se, ci_lo=ci.lo, ci_hi=ci.hi)
        if name == "scale":
            row["elasticity"] = est.elasticity
            row["t_stat"] = test.t_stat
            row["p_value"] = test.p_value
        rows.append(row)
    detail = dict(
        base,
        mu=None if policy.simultaneous else policy.mu,
        effects={name: asdict(ci) for name, ci in cis.items()},
        elasticity=est.elasticity,
        scale_test=None if test is None else asdict(test),
        theta=fit.model.theta,
        iterations=fit.model.iterations,
        gradient_norm=fit.model.gradient_norm,
    )
    return rows, detail


def cmd_estimate(args) -> int:
    x_cols = _names(args.x)
    w_cols = _names(args.w) if args.w else []
    if args.simultaneous and len(x_cols) != 2:
        raise ConfigError("--simultaneous needs exactly two --x columns")
    if not args.simultaneous and len(x_cols) != 1:
        raise ConfigError("location-scale estimation needs exactly one --x column")
    if not all(0.0 < t < 1.0 for t in args.tau):
        raise ConfigError("--tau values must lie in (0, 1)")
    if not 0.0 < args.level < 1.0:
        raise ConfigError("--level must lie in (0, 1)")
    path = Path(args.data)
    if not path.is_file():
        raise DataError(f"data file not found: {path}")
    data, load = ingest_csv(path, args.y, x_cols, w_cols)
    if data.n < MIN_ESTIMATION_ROWS:
        raise DataError(f"{data.n} usable rows; estimation needs at least {MIN_ESTIMATION_ROWS}")
    policy = _policy_from_args(args, float(data.x[:, 0].mean()))
    basis = BasisSpec((args.basis,))
    kernel = None
    if args.bandwidth is not None:
        try:
            kernel = KernelSpec(args.bandwidth)
        except ValueError as exc:
            raise ConfigError(f"--bandwidth: {exc}") from None

    rows, details = [], []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for tau in args.tau:
            for link in args.link:
                try:
                    r, d = _estimate_one(data, policy, tau, LinkKind(link), basis, kernel, args)
                except UpeError as exc:
                    exc.tau = tau
                    exc.link = link
                    raise
                rows.extend(r)
                details.append(d)

    out = Path(args.out)
    report.write_csv(out / "effects.csv", report.EFFECT_COLUMNS, rows)
    report.write_json(out / "report.json", {
        "command": "estimate",
        "outcome": data.y_name if not args.log_outcome else f"log({data.y_name})",
        "targets": list(data.x_names),
        "controls": list(data.w_names),
        "policy": asdict(policy),
        "basis": args.basis,
        "level": args.level,
        "log_outcome": args.log_outcome,
        "load_report": load.as_dict(),
        "results": details,
    })
    return 0


# ------------------------------------------------------------ Monte Carlo runs

def _mc_setup(args, command):
    raw = cfgmod.load_toml(args.config) if args.config else {}
    overrides = {"mc.seed": args.seed, "mc.reps": args.reps, "mc.n": args.n,
                 "mc.workers": args.workers}
    if args.full:
        overrides["mc.full"] = True
    cfg = cfgmod.resolve(command, raw, overrides)
    return cfg, cfgmod.build_mc_config(cfg, default_workers=mc.default_workers())


def _config_record(config: mc.McConfig) -> dict:
    """Run configuration for the summary file; the worker count is left out on purpose."""
    rec = asdict(config)
    rec.pop("workers")
    return rec


def _write_mc(out: Path, name: str, summary: mc.McSummary, config: mc.McConfig, extra=None):
    report.write_csv(out / f"{name}.csv", report.MC_COLUMNS, report.mc_rows(summary))
    return {
        "failures": [
            {"link": k[0], "tau": k[1], "gamma": k[2], "count": v}
            for k, v in summary.failures.items()
        ],
        "invalid": [{"link": k[0], "tau": k[1], "gamma": k[2]} for k in summary.invalid],
        **(extra or {}),
    }


def wide_bias_table(summary: mc.McSummary, config: mc.McConfig):
    """Bias, variance and MSE laid out with one column per quantile level."""
    columns = ["n", "statistic", "estimator", "link"] + [f"tau_{t:g}" for t in config.taus]
    rows = []
    for stat in ("bias", "variance", "mse"):
        for est in ("pi_L", "pi_S"):
            for link in config.links:
                vals = [summary.get(est, link, t, stat).value for t in config.taus]
                rows.append([config.n, stat, est, link, *vals])
    return columns, rows


def cmd_simulate(args) -> int:
    cfg, config = _mc_setup(args, "simulate")
    out = Path(args.out)
    meta = {"command": "simulate", "config": _config_record(config), "tables": {}}
    for table in cfgmod.tables(cfg):
        if table == "bias":
            summary = mc.run_bias_table(config)
            columns, rows = wide_bias_table(summary, config)
            report.write_csv(out / "table1.csv", columns, rows)
            meta["tables"]["bias"] = _write_mc(out, "bias_table", summary, config)
        else:
            summary = mc.run_coverage_table(config)
            meta["tables"]["coverage"] = _write_mc(out, "coverage_table", summary, config)
    report.write_json(out / "summary.json", meta)
    return 0


def cmd_power(args) -> int:
    _, config = _mc_setup(args, "power")
    out = Path(args.out)
    summary = mc.run_power_curve(config)
    info = _write_mc(out, "power_table", summary, config)
    for name, series in summary.series.items():
        report.write_series(out / f"{name}.csv", series)
    report.write_json(out / "summary.json",
                      {"command": "power", "config": _config_record(config), **info})
    return 0


def cmd_normality(args) -> int:
    _, config = _mc_setup(args, "normality")
    out = Path(args.out)
    summary = mc.run_normality_diag(config)
    info = _write_mc(out, "normality_table", summary, config)
    for name, series in summary.series.items():
        report.write_series(out / "series" / f"{name}.csv", series)
    report.write_json(out / "summary.json",
                      {"command": "normality", "config": _config_record(config), **info})
    return 0


def cmd_oracle(args) -> int:
    raw = cfgmod.load_toml(args.config) if args.config else {}
    cfg = cfgmod.resolve("oracle", raw, {"oracle.delta": args.delta, "oracle.nsim": args.nsim,
                                         "oracle.seed": args.seed})
    s = cfgmod.build_oracle_settings(cfg)
    rows, stein_rows = [], []
    all_pass = True
    for tau in s.taus:
        cf = closed_form_effects(s.dgp, s.policy, tau)
        bf = brute_force_effect(s.dgp, s.policy, tau, s.delta, s.nsim, s.seed)
        for channel, exact, num, se in (("location", cf.pi_L, bf.pi_L, bf.se_L),
                                        ("scale", cf.pi_S, bf.pi_S, bf.se_S)):
            tol = max(3.0 * se, ORACLE_FLOOR)
            diff = abs(num - exact)
            ok = diff <= tol
            all_pass &= ok
            rows.append({"tau": tau, "channel": channel, "closed_form": exact,
                         "brute_force": num, "mc_se": se, "abs_diff": diff,
                         "tolerance": tol, "pass": ok})
        residual = stein_check(s.dgp, tau, s.n_quad)
        ok = residual <= STEIN_LIMIT
        all_pass &= ok
        stein_rows.append({"tau": tau, "n_quad": s.n_quad, "residual": residual, "pass": ok})
    out = Path(args.out)
    report.write_csv(out / "oracle_table.csv", ("tau", "channel", "closed_form", "brute_force",
                                                "mc_se", "abs_diff", "tolerance", "pass"), rows)
    report.write_csv(out / "stein_table.csv", ("tau", "n_quad", "residual", "pass"), stein_rows)
    report.write_json(out / "summary.json", {
        "command": "oracle", "dgp": asdict(s.dgp), "policy": asdict(s.policy),
        "delta": s.delta, "nsim": s.nsim, "seed": s.seed, "all_pass": all_pass,
        "rows": rows, "stein": stein_rows,
    })
    if not all_pass:
        raise NumericalError("closed-form and brute-force effects disagree; see oracle_table.csv")
    return 0


def cmd_synth(args) -> int:
    n = args.n if args.n is not None else (526 if args.profile == "wage1-like" else 1000)
    cols = generate(args.profile, n, args.seed)
    report.write_csv(args.out, list(cols), zip(*cols.values()))
    return 0


# ----------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="upe", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    est = sub.add_parser("estimate", help="effects, standard errors and the scale t-test")
    est.add_argument("--data", required=True)
    est.add_argument("--y", required=True)
    est.add_argument("--x", required=True, help="target column, or two with --simultaneous")
    est.add_argument("--w", default="", help="comma-separated control columns")
    est.add_argument("--tau", type=_floats, default=[0.1, 0.25, 0.5, 0.75, 0.9])
    est.add_argument("--link", type=_links, default=["probit"])
    est.add_argument("--basis", choices=("linear", "quadratic"), default="linear")
    est.add_argument("--ldot0", type=float, default=1.0)
    est.add_argument("--sdot0", type=float, default=1.0)
    est.add_argument("--mu", type=float, default=None, help="scale pivot (default: mean of X)")
    est.add_argument("--simultaneous", action="store_true")
    est.add_argument("--ldot", type=_floats, default=None)
    est.add_argument("--log-outcome", action="store_true")
    est.add_argument("--bandwidth", type=float, default=None)
    est.add_argument("--level", type=float, default=0.95)
    est.add_argument("--strict-indicator", action="store_true",
                     help="use 1{Y < q} in the quantile influence function")
    est.add_argument("--out", required=True)
    est.set_defaults(func=cmd_estimate)

    for name, func, text in (("simulate", cmd_simulate, "bias/variance/MSE and coverage tables"),
                             ("power", cmd_power, "size-adjusted power of the scale t-test"),
                             ("normality", cmd_normality, "KS and QQ diagnostics")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--config")
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--reps", type=int, default=None)
        p.add_argument("--n", type=int, default=None)
        p.add_argument("--full", action="store_true", help=f"{mc.FULL_REPS} replications")
        p.add_argument("--out", required=True)
        p.set_defaults(func=func)

    orc = sub.add_parser("oracle", help="closed-form vs brute-force effects")
    orc.add_argument("--config")
    orc.add_argument("--delta", type=float, default=None)
    orc.add_argument("--nsim", type=int, default=None)
    orc.add_argument("--seed", type=int, default=None)
    orc.add_argument("--out", required=True)
    orc.set_defaults(func=cmd_oracle)

    syn = sub.add_parser("synth-data", help="write a synthetic CSV fixture")
    syn.add_argument("--profile", choices=SYNTH_PROFILES, required=True)
    syn.add_argument("--n", type=int, default=None)
    syn.add_argument("--seed", type=int, default=0)
    syn.add_argument("--out", required=True)
    syn.set_defaults(func=cmd_synth)
    return parser


def _error_payload(exc: UpeError) -> dict:
    payload = {"error": type(exc).__name__, "exit_code": exc.exit_code, "message": str(exc)}
    for attr in ("tau", "link", "row", "column"):
        value = getattr(exc, attr, None)
        if value is not None:
            payload[attr] = value
    return payload


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UpeError as exc:
        print(json.dumps(_error_payload(exc)), file=sys.stderr)
        return exc.exit_code
    except np.linalg.LinAlgError as exc:
        print(json.dumps({"error": "LinAlgError", "exit_code": 4, "message": str(exc)}),
              file=sys.stderr)
        return 4
    except OSError as exc:
        print(json.dumps({"error": type(exc).__name__, "exit_code": 3, "message": str(exc)}),
              file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
