"""Command-line entry point.

Subcommands: validate | weights | converge | simulate | frontier |
inefficiency.  Every command reads one config file (see
:mod:`naive_mv.config`); flags override file values.  Exit codes are a
stable contract: 0 success, 1 domain/assumption failure, 2 parse failure,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import analysis, market, policies, simulation
from .config import RunConfig, load_run_config
from .errors import (AlignmentError, AssumptionError, ConfigError,
                     ConvergenceError, DomainError)
from .market import case1_target, case2_target

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_PARSE = 2
EXIT_NUMERICAL = 3


def _add_common(p: argparse.ArgumentParser, sim: bool = False):
    p.add_argument("config", help="path to a run-configuration file")
    p.add_argument("--out", default=None, help="output CSV path")
    p.add_argument("--plot", default=None, metavar="SVG",
                   help="optionally write an SVG line plot of the CSV data")
    if sim:
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--paths", type=int, default=None)
        p.add_argument("--steps", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="naive-mv",
        description="Mean-variance policy comparison and convergence experiments")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check market/target assumptions")
    p.add_argument("config")

    p = sub.add_parser("weights", help="risky-weight dominance table")
    _add_common(p)
    p.add_argument("--case", type=int, choices=(1, 2), default=None,
                   help="override the configured target case")
    p.add_argument("--points", type=int, default=1001)

    p = sub.add_parser("converge", help="dyadic re-commitment convergence table")
    _add_common(p, sim=True)
    p.add_argument("--nmin", type=int, default=2)
    p.add_argument("--nmax", type=int, default=8)

    p = sub.add_parser("simulate", help="Monte Carlo ensemble summary")
    _add_common(p, sim=True)
    p.add_argument("--policy", default="naive",
                   choices=("naive", "pre_committed", "zero", "weak", "regular"))

    p = sub.add_parser("frontier", help="efficient-frontier variance at a mean")
    _add_common(p)
    p.add_argument("--expected", type=float, required=True)
    p.add_argument("--s", type=float, default=0.0)
    p.add_argument("--y", type=float, default=None,
                   help="anchor wealth (default: initial_wealth)")

    p = sub.add_parser("inefficiency", help="variance gap to the frontier")
    _add_common(p, sim=True)
    p.add_argument("--policy", default="naive",
                   choices=("naive", "pre_committed", "zero"))
    return ap


def _case_target(rc: RunConfig, case: int | None):
    """Target for the weight formulas, honoring a --case override."""
    if case is None:
        if rc.target.kind not in (market.CASE1_ALPHA, market.CASE2_K):
            raise DomainError(
                "weight formulas need a built-in case target; pass --case or "
                "set target.kind to case1_alpha / case2_k")
        return rc.target
    if rc.params is None:
        raise DomainError("--case requires a single-stock market")
    if case == 1:
        return case1_target(rc.params, rc.target.params.get("alpha", 1.0))
    return case2_target(rc.params, rc.target.params["k"]) \
        if "k" in rc.target.params else case2_target(rc.params, 0.05)


def _build_policy(rc: RunConfig, name: str):
    if name == "naive":
        return policies.naive_policy(rc.model, rc.target)
    if name == "pre_committed":
        return policies.pre_committed_policy(rc.model, rc.target, 0.0,
                                             rc.initial_wealth)
    if name == "zero":
        return policies.ZeroPolicy(rc.model)
    if rc.params is None:
        raise DomainError(f"policy '{name}' requires a single-stock market")
    case = _case_target(rc, None)
    if name == "weak":
        return policies.weak_equilibrium_policy(rc.params, case)
    return policies.regular_equilibrium_policy(rc.params, case)


def _write_svg(path, xs, series: dict[str, np.ndarray]) -> None:
    """Minimal SVG polyline plot of the data already present in the CSV."""
    W, H, pad = 720, 420, 50
    xs = np.asarray(xs, dtype=float)
    all_y = np.concatenate([np.asarray(v, dtype=float) for v in series.values()])
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(all_y.min()), float(all_y.max())
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b"]

    def sx(x):
        return pad + (x - x0) / (x1 - x0) * (W - 2 * pad)

    def sy(y):
        return H - pad - (y - y0) / (y1 - y0) * (H - 2 * pad)

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}">',
             f'<rect width="{W}" height="{H}" fill="white"/>']
    for i, (name, ys) in enumerate(series.items()):
        pts = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(xs, ys))
        col = colors[i % len(colors)]
        parts.append(f'<polyline fill="none" stroke="{col}" stroke-width="1.5" '
                     f'points="{pts}"/>')
        parts.append(f'<text x="{pad + 8}" y="{pad + 16 * (i + 1)}" '
                     f'fill="{col}" font-size="13">{name}</text>')
    parts.append(f'<text x="{pad}" y="{H - 12}" font-size="12">'
                 f'x: [{x0:.6g}, {x1:.6g}]  y: [{y0:.6g}, {y1:.6g}]</text>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts))


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_validate(args) -> int:
    rc = load_run_config(args.config)
    report = market.validate_assumptions(rc.model, rc.target)
    print(report)
    return EXIT_OK if report.all_passed else EXIT_DOMAIN


def cmd_weights(args) -> int:
    rc = load_run_config(args.config)
    if rc.params is None:
        raise DomainError("weight comparison requires a single-stock market")
    case = _case_target(rc, args.case)
    times = np.linspace(0.0, rc.model.horizon, args.points)
    report = policies.dominance_report(rc.params, case, times)
    out = args.out or "weights.csv"
    report.to_csv(out)
    if args.plot:
        _write_svg(args.plot, report.times,
                   {"c_na": report.c_na, "c_we": report.c_we, "c_re": report.c_re})
    ok = report.all_margins_positive(rc.model.horizon)
    print(f"{'PASS' if ok else 'FAIL'}  naive weight dominates both equilibrium "
          f"weights at all interior grid points -> {out}")
    return EXIT_OK if ok else EXIT_DOMAIN


def cmd_converge(args) -> int:
    rc = load_run_config(args.config)
    cfg = rc.sim_config(paths=args.paths, steps=args.steps, seed=args.seed)
    if args.nmin > args.nmax:
        raise DomainError("--nmin must not exceed --nmax")
    rows = analysis.convergence_metric(range(args.nmin, args.nmax + 1),
                                       rc.model, rc.target, cfg)
    out = args.out or "converge.csv"
    analysis.write_convergence_csv(out, rows)
    if args.plot:
        _write_svg(args.plot, [r.n for r in rows],
                   {"d_n": np.array([r.d_n for r in rows])})
    decreasing = all(rows[i + 1].d_n < rows[i].d_n for i in range(len(rows) - 1))
    bounded = all(r.increment_mc <= r.increment_bound + 3 * r.increment_se
                  for r in rows)
    print(f"{'PASS' if decreasing else 'FAIL'}  d_n strictly decreasing over "
          f"n={args.nmin}..{args.nmax}")
    print(f"{'PASS' if bounded else 'FAIL'}  increment second moments within "
          f"the theoretical bound (+3 SE)")
    return EXIT_OK if (decreasing and bounded) else EXIT_NUMERICAL


def cmd_simulate(args) -> int:
    rc = load_run_config(args.config)
    cfg = rc.sim_config(paths=args.paths, steps=args.steps, seed=args.seed)
    policy = _build_policy(rc, args.policy)
    summary = simulation.simulate_policy_summary(policy, rc.model, 0.0,
                                                 rc.initial_wealth, cfg)
    out = args.out or "simulate.csv"
    summary.to_csv(out)
    if args.plot:
        _write_svg(args.plot, summary.times, {"mean": summary.mean})
    mean = float(summary.terminal.mean())
    se = float(summary.terminal.std(ddof=1) / np.sqrt(cfg.n_paths))
    reference = _closed_form_mean(rc, args.policy)
    if reference is not None:
        # 3 SE of sampling noise plus an O(h) allowance for the weak
        # discretization bias of the Euler step (exact for scheme=exact_log).
        bias = 0.0 if cfg.scheme == simulation.EXACT_LOG \
            else abs(reference) * cfg.grid.step
        ok = abs(mean - reference) <= 3 * se + bias
        print(f"{'PASS' if ok else 'FAIL'}  terminal mean {mean:.8f} within "
              f"3 SE ({se:.2e}) + discretization allowance ({bias:.2e}) of "
              f"closed form {reference:.8f} -> {out}")
        return EXIT_OK if ok else EXIT_NUMERICAL
    print(f"terminal mean {mean:.8f} (SE {se:.2e}) -> {out}")
    return EXIT_OK


def _closed_form_mean(rc: RunConfig, policy_name: str) -> float | None:
    import math
    if policy_name == "zero":
        return rc.initial_wealth * math.exp(rc.model.int_r(0.0, rc.model.horizon))
    if policy_name == "pre_committed" and rc.target.f is not None:
        return rc.initial_wealth * rc.target.f(0.0, rc.model.horizon)
    if policy_name == "naive" and rc.params is not None \
            and rc.target.kind == market.CASE1_ALPHA:
        return analysis.expected_terminal_naive_closed(
            rc.params, rc.target.params["alpha"], rc.initial_wealth)
    return None


def cmd_frontier(args) -> int:
    rc = load_run_config(args.config)
    y = rc.initial_wealth if args.y is None else args.y
    V = analysis.frontier_variance(rc.model, args.s, y, args.expected)
    out = args.out or "frontier.csv"
    with open(out, "w", newline="") as fh:
        fh.write("s,y,expected,variance\n")
        fh.write(f"{args.s:.12g},{y:.12g},{args.expected:.12g},{V:.12g}\n")
    print(f"frontier variance at (s={args.s}, y={y}, E={args.expected}): "
          f"{V:.8f} -> {out}")
    return EXIT_OK


def cmd_inefficiency(args) -> int:
    rc = load_run_config(args.config)
    cfg = rc.sim_config(paths=args.paths, steps=args.steps, seed=args.seed)
    policy = _build_policy(rc, args.policy)
    rep = analysis.inefficiency_report(policy, rc.model, cfg)
    out = args.out or "inefficiency.csv"
    with open(out, "w", newline="") as fh:
        fh.write("policy,mean,mean_se,variance,frontier_var,gap,gap_se,z\n")
        fh.write(f"{rep.policy_kind},{rep.mean:.12g},{rep.mean_se:.12g},"
                 f"{rep.variance:.12g},{rep.frontier_var:.12g},{rep.gap:.12g},"
                 f"{rep.gap_se:.12g},{rep.z_score:.12g}\n")
    if args.policy == "naive":
        ok = rep.z_score > 3
        verdict = "strictly above the frontier (z > 3)"
    else:
        ok = abs(rep.gap) <= 3 * rep.gap_se
        verdict = "on the frontier (|gap| <= 3 SE)"
    print(f"{'PASS' if ok else 'FAIL'}  {args.policy} variance gap "
          f"{rep.gap:.6g} (SE {rep.gap_se:.2e}): {verdict} -> {out}")
    return EXIT_OK if ok else EXIT_NUMERICAL


COMMANDS = {
    "validate": cmd_validate,
    "weights": cmd_weights,
    "converge": cmd_converge,
    "simulate": cmd_simulate,
    "frontier": cmd_frontier,
    "inefficiency": cmd_inefficiency,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (AssumptionError, DomainError) as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except (ConvergenceError, AlignmentError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
