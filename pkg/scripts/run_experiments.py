#!/usr/bin/env python3
"""Run the full experiment pipeline at desk scale and collect CSV/SVG output.

Usage:
    python3 scripts/run_experiments.py [--config configs/default.cfg]
                                       [--outdir results] [--paths N]

Produces, under --outdir:
    validate.txt       assumption report
    weights.csv/.svg   risky-weight dominance table (naive vs equilibria)
    converge.csv/.svg  dyadic re-commitment convergence table d_n
    simulate_<p>.csv   ensemble summaries for each policy
    frontier.csv       frontier variance at the pre-committed mean
    inefficiency_<p>.csv  variance gap to the frontier per policy
"""

import argparse
import contextlib
import io
import math
import sys
from pathlib import Path

from naive_mv import cli, load_run_config


def run(outdir: Path, name: str, argv: list[str]) -> int:
    print(f"$ naive-mv {' '.join(argv)}")
    code = cli.main(argv)
    print(f"  -> exit {code}")
    return code


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default="configs/default.cfg")
    ap.add_argument("--outdir", default="results")
    ap.add_argument("--paths", type=int, default=100_000)
    ap.add_argument("--steps", type=int, default=2048)
    args = ap.parse_args()

    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = args.config
    sim = ["--paths", str(args.paths), "--steps", str(args.steps)]
    failures = 0

    buf = io.StringIO()
    with contextlib.redirect_stdout(buf):
        code = cli.main(["validate", cfg])
    (out / "validate.txt").write_text(buf.getvalue())
    print(f"$ naive-mv validate {cfg}\n  -> exit {code}")
    failures += code != 0

    failures += run(out, "weights", [
        "weights", cfg, "--out", str(out / "weights.csv"),
        "--plot", str(out / "weights.svg")]) != 0

    failures += run(out, "converge", [
        "converge", cfg, *sim, "--nmin", "2", "--nmax", "8",
        "--out", str(out / "converge.csv"),
        "--plot", str(out / "converge.svg")]) != 0

    for policy in ("naive", "pre_committed", "weak", "regular"):
        failures += run(out, f"simulate {policy}", [
            "simulate", cfg, *sim, "--policy", policy,
            "--out", str(out / f"simulate_{policy}.csv")]) != 0

    rc = load_run_config(cfg)
    mean = rc.initial_wealth * rc.target.growth_factor(0.0, rc.model.horizon)
    failures += run(out, "frontier", [
        "frontier", cfg, "--expected", f"{mean:.12g}",
        "--out", str(out / "frontier.csv")]) != 0

    for policy in ("naive", "pre_committed"):
        failures += run(out, f"inefficiency {policy}", [
            "inefficiency", cfg, *sim, "--policy", policy,
            "--out", str(out / f"inefficiency_{policy}.csv")]) != 0

    print(f"\n{'all experiments passed' if failures == 0 else f'{failures} experiment(s) failed'}"
          f"; outputs in {out}/")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
