"""Command-line front end.

    python3 -m hestoncap check    --scenario FILE
    python3 -m hestoncap solve    --scenario FILE [--out CSV] [--grid N] [--force]
    python3 -m hestoncap wel      --scenario FILE [--out CSV] [--force] [--euler] [--curve]
    python3 -m hestoncap sweep    --scenario FILE [--out CSV] [--euler]
    python3 -m hestoncap simulate --scenario FILE [--seed N] [--force]
    python3 -m hestoncap pcsv     --scenario FILE [--out CSV] [--grid N] [--force]

Exit codes: 0 ok, 2 parse/validation error, 3 assumptions fail, 4 Monte Carlo mismatch.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from contextlib import contextmanager
from dataclasses import replace

import numpy as np

from .core import check_assumptions
from .errors import AssumptionError, HestonCapError, ValidationError
from .extensions import PcsvParams, exposure_report, solve_pcsv
from .montecarlo import estimate_utilities
from .policy import policy_curve, value_surface
from .scenario import Scenario, load_scenario
from .wel import DeterministicStrategy, make_strategy, sweep, wel_report

EXIT_OK, EXIT_PARSE, EXIT_ASSUMPTIONS, EXIT_MC = 0, 2, 3, 4
Z_LIMIT = 3.0


def fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


@contextmanager
def _sink(path):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            yield fh


def write_csv(path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    with _sink(path) as fh:
        fh.write(buf.getvalue())


def _apply_flags(sc: Scenario, args) -> Scenario:
    changes = {}
    if getattr(args, "grid", None) is not None:
        changes["grid"] = args.grid
    if getattr(args, "force", False):
        changes["force"] = True
    if getattr(args, "euler", False):
        changes["euler"] = True
    if getattr(args, "seed", None) is not None:
        changes["mc"] = replace(sc.mc, seed=args.seed)
    return replace(sc, **changes) if changes else sc


def cmd_check(sc: Scenario, args) -> int:
    rep = check_assumptions(sc.market, sc.constraint)
    print(rep.summary())
    for f in rep.failures():
        print("  " + f)
    return EXIT_OK if rep.passed else EXIT_ASSUMPTIONS


def cmd_solve(sc: Scenario, args) -> int:
    c = policy_curve(sc.market, sc.constraint, grid=sc.grid, force=sc.force)
    write_csv(args.out, c.COLUMNS, c.rows())
    return EXIT_OK


def cmd_wel(sc: Scenario, args) -> int:
    p, K = sc.market, sc.constraint
    rep = check_assumptions(p, K)
    strat = make_strategy(sc.wel_strategy, p, K)
    r = wel_report(p, K, strat, steps=sc.wel_steps, method="euler" if sc.euler else "rk4",
                   force=sc.force, grid=sc.grid)
    if args.curve:
        t = np.linspace(0.0, p.T, sc.grid)
        write_csv(args.out, ("t", "L"), zip(t, r.L(t, p.z0)))
    else:
        flag = "ok" if rep.passed else "fail"
        write_csv(args.out, ("axis", "L0", "delta_max", "assumption_flag"),
                  [(strat.label, r.L0, r.delta_max, flag)])
    return EXIT_OK


def cmd_sweep(sc: Scenario, args) -> int:
    if sc.sweep is None:
        raise ValidationError("scenario has no [sweep] section")
    s = sc.sweep
    rows = sweep(sc.market, sc.constraint, s.axis, s.values, s.strategy, s.alpha_relative,
                 steps=sc.wel_steps, method="euler" if sc.euler else "rk4")
    write_csv(args.out, ("axis", "L0", "delta_max", "assumption_flag"),
              [(r.axis, r.L0, r.delta_max, r.assumption_flag) for r in rows])
    return EXIT_OK


def _mc_strategy(name, p, K, B):
    if name == "pi_star":
        return DeterministicStrategy.optimal(p, K, B)
    if name == "cap_merton":
        return DeterministicStrategy.merton_capped(p, K)
    if name == "cap_pi_u":
        return DeterministicStrategy.unconstrained_capped(p, K)
    return DeterministicStrategy.constant(0.0, "zero")


def cmd_simulate(sc: Scenario, args) -> int:
    p, K = sc.market, sc.constraint
    vs = value_surface(p, K, force=sc.force)
    G = float(vs.value(0.0, p.v0, p.z0))
    strats = []
    for name in sc.mc_strategies:
        try:
            strats.append(_mc_strategy(name, p, K, vs.B))
        except HestonCapError as e:
            print(f"skipping {name}: {e}", file=sys.stderr)
    res = estimate_utilities(p, strats, sc.mc)
    est = res.estimates[0]
    gap = est.mean - G
    if abs(gap) <= 64 * np.finfo(float).eps * abs(G):
        z = 0.0  # agreement to rounding; the SE can be rounding noise too
    else:
        z = gap / est.std_error if est.std_error > 0 else math.inf
    out = sys.stdout
    print(f"analytic G(0, v0, z0) = {G:.10g}", file=out)
    print(f"MC pi_star mean = {est.mean:.10g}  SE = {est.std_error:.3g}  z-score = {z:.3f}", file=out)
    print(f"clipped variance increments: {res.clipped_fraction:.4%}", file=out)
    print(f"{'strategy':<12} {'mean':>16} {'SE':>11} {'pi_star - s':>14} {'SE diff':>11} {'diff/SE':>8}",
          file=out)
    for lab, e, d, dse in zip(res.labels, res.estimates, res.diff_mean, res.diff_se):
        ratio = d / dse if dse > 0 else 0.0
        print(f"{lab:<12} {e.mean:>16.10g} {e.std_error:>11.3g} {d:>14.6g} {dse:>11.3g} {ratio:>8.2f}",
              file=out)
    if args.out:
        write_csv(args.out, ("strategy", "mean", "std_error", "diff_vs_pi_star", "diff_se"),
                  [(lab, e.mean, e.std_error, d, dse)
                   for lab, e, d, dse in zip(res.labels, res.estimates, res.diff_mean, res.diff_se)])
    return EXIT_OK if abs(z) <= Z_LIMIT else EXIT_MC


def cmd_pcsv(sc: Scenario, args) -> int:
    if sc.pcsv is None:
        raise ValidationError("scenario has no [pcsv] section")
    s, m = sc.pcsv, sc.market
    pp = PcsvParams(s.A, s.eta, s.kappa, s.theta, s.sigma, s.rho, s.z0, s.beta_caps,
                    r=m.r, b=m.b, T=m.T, v0=m.v0, repair=s.repair)
    sol = solve_pcsv(pp, grid=sc.grid, force=sc.force)
    d = pp.d
    header = ["t"] + [f"pi_{i + 1}" for i in range(d)] + [f"pi_factor_{i + 1}" for i in range(d)]
    write_csv(args.out, header, (
        (sol.t[k], *sol.pi[k], *sol.pi_factor[k]) for k in range(len(sol.t))
    ))
    for i, ratio in enumerate(exposure_report(pp, sol)):
        print(f"factor {i + 1}: max exposure^2 / cap = {ratio:.12g}", file=sys.stderr)
    return EXIT_OK


COMMANDS = {
    "check": cmd_check, "solve": cmd_solve, "wel": cmd_wel, "sweep": cmd_sweep,
    "simulate": cmd_simulate, "pcsv": cmd_pcsv,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hestoncap",
                                 description="Constrained optimal portfolios under Heston volatility.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--scenario", required=True, help="scenario INI file")
        sp.add_argument("--out", default=None, help="CSV output path (default stdout)")
        sp.add_argument("--grid", type=int, default=None, help="number of time grid points")
        sp.add_argument("--seed", type=int, default=None, help="Monte Carlo seed (u64)")
        sp.add_argument("--force", action="store_true", help="run even if assumptions fail")
        sp.add_argument("--euler", action="store_true", help="explicit Euler exponent solver")
        if name == "wel":
            sp.add_argument("--curve", action="store_true", help="emit L(t, z0) over time instead")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        sc = _apply_flags(load_scenario(args.scenario), args)
        if args.grid is not None and args.grid < 2:
            raise ValidationError("--grid must be >= 2")
        if args.seed is not None and not 0 <= args.seed < 2 ** 64:
            raise ValidationError("--seed must be an unsigned 64-bit integer")
    except (ValidationError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PARSE
    try:
        # sweeps flag failing points themselves; pcsv checks each factor
        if args.command in ("solve", "wel", "simulate") and not sc.force:
            rep = check_assumptions(sc.market, sc.constraint)
            if not rep.passed:
                for f in rep.failures():
                    print("  " + f, file=sys.stderr)
                print("error: assumptions fail (use --force to run anyway)", file=sys.stderr)
                return EXIT_ASSUMPTIONS
        return COMMANDS[args.command](sc, args)
    except AssumptionError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ASSUMPTIONS
    except (ValidationError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
