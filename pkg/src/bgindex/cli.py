"""Command line interface: ``bgindex {simulate,estimate,montecarlo,fisher,rates}``.

Exit status is 0 on success, 1 on a configuration or usage error and 2 on a
numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import asdict
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import fisher as fi
from .estimators import ContrastConfig, PrelimConfig, final_estimate, preliminary_estimate, sanitize
from .harness import ConfigError, ExperimentConfig, replicate_seed, run_monte_carlo
from .simulate import SamplingScheme, read_increments, simulate_path, write_increments

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2


class NumericalFailure(RuntimeError):
    pass


def _emit(text: str, out) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, newline="")


def _fraction(s: str) -> Fraction:
    try:
        return Fraction(s)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a number: {s!r}") from None


def _fmt(q) -> str:
    if q is None:
        return "n/a"
    if isinstance(q, Fraction):
        return str(q) if q.denominator == 1 else f"{q} ({float(q):.6g})"
    return f"{q:.6g}"


def _jsonable(q):
    if isinstance(q, Fraction):
        return str(q)
    if isinstance(q, fi.Rate):
        return {"delta_exponent": _jsonable(q.delta_exponent), "log_exponent": _jsonable(q.log_exponent)}
    if isinstance(q, dict):
        return {k: _jsonable(v) for k, v in q.items()}
    return q


# ----------------------------------------------------------------------------
# subcommands


def cmd_simulate(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    seed = replicate_seed(cfg.seed if args.seed is None else args.seed, args.replicate)
    series = simulate_path(cfg.model, cfg.scheme, cfg.mode, seed, cfg.floor, cfg.substeps)
    if not np.all(np.isfinite(series.increments)):
        raise NumericalFailure("non-finite increments")
    write_increments(args.out, series)
    print(f"wrote {series.n} increments (delta={series.delta:.6g}, seed={seed}) to {args.out}", file=sys.stderr)
    return EXIT_OK


def cmd_estimate(args) -> int:
    series = read_increments(args.input)
    scheme = SamplingScheme.from_count(series.n, series.delta)
    if args.config:
        cfg = ExperimentConfig.load(args.config)
        prelim_cfg, contrast_cfg, side = cfg.prelim, cfg.contrast, cfg.side
    else:
        prelim_cfg, contrast_cfg, side = PrelimConfig(), ContrastConfig(), "absolute"
    pre = sanitize(preliminary_estimate(series, scheme, prelim_cfg, side))
    if not np.any(pre.usable):
        raise NumericalFailure("preliminary estimator failed at every index")
    fin = final_estimate(series, scheme, pre, contrast_cfg, side)
    if not np.any(fin.usable):
        raise NumericalFailure(f"contrast minimization failed: {fin.diagnostics.get('note', '')}")
    if args.format == "json":
        text = json.dumps({"preliminary": pre.to_dict(), "final": fin.to_dict()}, indent=2, default=float) + "\n"
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(["kind", "index", "beta", "gamma", "status"])
        for est in (pre, fin):
            for i in range(est.j):
                w.writerow([est.kind, i + 1, repr(float(est.beta[i])), repr(float(est.gamma[i])), est.status[i].value])
        text = buf.getvalue()
    _emit(text, args.out)
    return EXIT_OK


def cmd_montecarlo(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    if args.seed is not None:
        cfg = cfg.with_overrides(seed=args.seed)
    if args.replicates is not None:
        cfg = cfg.with_overrides(replicates=args.replicates)
    table = run_monte_carlo(cfg, jobs=args.jobs)
    _emit(table.to_csv() if args.format == "csv" else table.to_json(), args.out)
    if table.summary["failures"] == len(table):
        raise NumericalFailure("every replicate failed")
    return EXIT_OK


def cmd_fisher(args) -> int:
    try:
        model = fi.ParametricModel(args.c, args.beta1, args.a1, args.beta2, args.a2)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    deltas = np.array(sorted(args.deltas))
    if deltas.size < 2 or np.any(deltas <= 0):
        raise ConfigError("--deltas: need at least two positive values")
    rows = []
    for d in deltas:
        res = fi.fisher_result(model, float(d), rtol=1e-3)
        rows.append(res)
    th = fi.theoretical_exponents(args.beta1, args.beta2)
    slopes = {
        k: {
            "theory": th[k][0],
            "fit_log_removed": fi.fit_exponent(deltas, [r.entries[k] for r in rows], th[k][1]),
            "fit_plain": fi.fit_exponent(deltas, [r.entries[k] for r in rows]),
        }
        for k in fi.PARAMS
    }
    if args.format == "json":
        doc = {
            "model": asdict(model),
            "rows": [{"delta": r.delta, **r.entries, "captured_mass": r.captured_mass,
                      "accurate": r.accurate} for r in rows],
            "exponents": slopes,
        }
        text = json.dumps(doc, indent=2) + "\n"
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(["delta", *fi.PARAMS, "captured_mass", "accurate"])
        for r in rows:
            w.writerow([repr(r.delta), *(repr(r.entries[k]) for k in fi.PARAMS), repr(r.captured_mass), r.accurate])
        for k, s in slopes.items():
            w.writerow([f"# exponent {k}", repr(s["theory"]), repr(s["fit_log_removed"]), repr(s["fit_plain"])])
        text = buf.getvalue()
    _emit(text, args.out)
    if not all(r.accurate for r in rows):
        raise NumericalFailure("derivative cross-check failed on at least one grid")
    return EXIT_OK


def rates_report(beta1: Fraction, beta2: Fraction, rho=None) -> dict:
    return {
        "beta1": beta1,
        "beta2": beta2,
        "optimal": fi.optimal_rates(beta1, beta2),
        "comparison": fi.rate_comparison(beta1, beta2, rho),
        "branch_point": fi.BRANCH_POINT_TEXT,
        "branch_point_value": fi.BRANCH_POINT,
        "efficiency_limit_beta1_to_2": fi.efficiency_limit(Fraction(2)),
    }


def cmd_rates(args) -> int:
    if not 0 < args.beta2 < args.beta1 < 2:
        raise ConfigError("need 0 < beta2 < beta1 < 2")
    try:
        rep = rates_report(args.beta1, args.beta2, args.rho)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if args.format == "json":
        _emit(json.dumps(_jsonable(rep), indent=2) + "\n", args.out)
        return EXIT_OK
    lines = [f"beta1 = {_fmt(args.beta1)}, beta2 = {_fmt(args.beta2)}", "",
             "optimal rates: error ~ Delta^e * log(1/Delta)^k",
             f"{'parameter':<10} {'e':>22} {'k':>22}"]
    for name, r in rep["optimal"].items():
        if r is None:
            lines.append(f"{name:<10} {'not identifiable':>22}")
        else:
            lines.append(f"{name:<10} {_fmt(r.delta_exponent):>22} {_fmt(r.log_exponent):>22}")
    cmp_ = rep["comparison"]
    lines += ["", f"contrast estimator at rho = {_fmt(cmp_['rho'])} (slack: {cmp_['epsilon_slack']}), "
                  f"branch: {cmp_['branch']} (branch point {fi.BRANCH_POINT_TEXT} = {fi.BRANCH_POINT:.6f})",
              f"{'index':<10} {'gamma':>22} {'gamma_prime':>22} {'gamma_prime/gamma':>22}"]
    for name in ("beta1", "beta2"):
        c = cmp_[name]
        lines.append(f"{name:<10} {_fmt(c['gamma']):>22} {_fmt(c['gamma_prime']):>22} {_fmt(c['efficiency']):>22}")
    lines.append(f"\nlimit of gamma_prime/gamma as beta1 -> 2: {_fmt(rep['efficiency_limit_beta1_to_2'])}")
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


# ----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bgindex", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, fmt_default="json"):
        sp.add_argument("--out", default=None, help="output path (default: stdout)")
        sp.add_argument("--format", choices=("csv", "json"), default=fmt_default)

    s = sub.add_parser("simulate", help="simulate one path and write its increments (binary)")
    s.add_argument("--config", required=True)
    s.add_argument("--seed", type=int, default=None, help="master seed (overrides the config)")
    s.add_argument("--replicate", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("estimate", help="estimate indices from an increment file")
    s.add_argument("input")
    s.add_argument("--config", default=None, help="experiment config supplying estimator settings")
    common(s)
    s.set_defaults(func=cmd_estimate)

    s = sub.add_parser("montecarlo", help="run a Monte Carlo experiment")
    s.add_argument("--config", required=True)
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--replicates", type=int, default=None)
    s.add_argument("--jobs", type=int, default=None, help="worker processes (default: $BGINDEX_JOBS or 1)")
    common(s, "csv")
    s.set_defaults(func=cmd_montecarlo)

    s = sub.add_parser("fisher", help="Fisher information over a ladder of time steps")
    s.add_argument("--c", type=float, default=0.1)
    s.add_argument("--beta1", type=float, default=1.0)
    s.add_argument("--a1", type=float, default=1.0)
    s.add_argument("--beta2", type=float, default=0.75)
    s.add_argument("--a2", type=float, default=1.0)
    s.add_argument("--deltas", type=float, nargs="+", default=[1e-5, 1e-4, 1e-3, 1e-2])
    common(s, "csv")
    s.set_defaults(func=cmd_fisher)

    s = sub.add_parser("rates", help="optimal and attained rate exponents")
    s.add_argument("--beta1", type=_fraction, required=True)
    s.add_argument("--beta2", type=_fraction, required=True)
    s.add_argument("--rho", type=_fraction, default=None)
    s.add_argument("--out", default=None)
    s.add_argument("--format", choices=("text", "json"), default="text")
    s.set_defaults(func=cmd_rates)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFailure, ArithmeticError, np.linalg.LinAlgError, RuntimeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        # malformed input files and out-of-domain parameters
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
