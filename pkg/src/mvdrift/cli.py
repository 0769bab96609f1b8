"""Command-line interface.

Subcommands: simulate, solve-invariant, estimate-density, estimate,
mc-study, report.  Every subcommand takes --config (a YAML file, see the
README reference) plus a few overrides; outputs are plain text, CSV or
grid-function files.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import config as cfgmod
from .grids import GridFunction
from .harness import format_report, rate_report, read_metrics_csv, run_experiment, write_metrics_csv
from .invariant import log_density_derivative, solve_invariant_full
from .kde import (default_bandwidths, default_delta, density_derivative_estimate,
                  density_estimate, effective_sample_size, log_derivative_estimate,
                  make_kernel)
from .model import BetaSpec  # noqa: F401  (re-export for config error messages)
from .pipeline import default_window, oracle_estimator_config, run_pipeline
from .invariant import alpha_oracle
from .simulator import load_samples, project, save_samples, simulate


def _common(parser: argparse.ArgumentParser):
    parser.add_argument("--config", required=True, help="YAML config file")
    parser.add_argument("--seed", type=int, default=None, help="override sim seed")
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--out-dir", default=".", help="output directory")


def _outpath(args, name):
    os.makedirs(args.out_dir, exist_ok=True)
    return os.path.join(args.out_dir, name)


def cmd_simulate(args):
    cfg = cfgmod.load_config(args.config)
    spec = cfgmod.drift_spec_from_config(cfg)
    sim = cfgmod.sim_config_from_config(cfg, n=args.n, t=args.t, dt=args.dt,
                                        seed=args.seed, stream=args.stream)
    ens = simulate(sim, spec, method=args.method)
    values = ens.positions if args.raw else project(ens.positions)
    out = args.out or _outpath(args, "samples.txt")
    save_samples(out, values, meta={
        "n": sim.n, "t": repr(sim.t), "dt": repr(sim.dt), "seed": sim.seed,
        "stream": sim.stream, "n_steps": ens.n_steps,
        "projected": str(not args.raw).lower()})
    print(f"wrote {len(values)} positions to {out}")


def cmd_solve_invariant(args):
    cfg = cfgmod.load_config(args.config)
    spec = cfgmod.drift_spec_from_config(cfg)
    half_width, n_points = cfgmod.grid_shape_from_config(cfg, spec)
    sol = solve_invariant_full(spec, half_width=args.half_width or half_width,
                               n_points=args.n_points or n_points,
                               tol=args.tol, max_iter=args.max_iter,
                               damping=args.damping)
    out = args.out or _outpath(args, "pi.txt")
    sol.pi.save(out)
    print(f"solved in {sol.n_iter} iterations, residual {sol.residual:.3e}, "
          f"Z = {sol.z!r}; wrote {out}")


def cmd_estimate_density(args):
    cfg = cfgmod.load_config(args.config)
    spec = cfgmod.drift_spec_from_config(cfg)
    samples, _ = load_samples(args.samples)
    half_width, n_points = cfgmod.grid_shape_from_config(cfg, spec)
    grid = GridFunction(half_width, np.zeros(n_points))
    est = cfg.get("estimator") or {}
    m = args.m or int(est.get("m", 2))
    n_eff = float(est.get("n_eff") or samples.size)
    h0_rule, h1_rule = default_bandwidths(n_eff, m)
    h0 = args.h0 or h0_rule
    h1 = args.h1 or h1_rule
    kernel = make_kernel(m)
    pi_hat = density_estimate(samples, kernel, h0, grid)
    pi_prime_hat = density_derivative_estimate(samples, kernel, h1, grid)

    if args.delta_mode == "fixed":
        if args.delta is None:
            raise SystemExit("--delta is required with --delta-mode fixed")
        delta = args.delta
    else:
        sol = solve_invariant_full(spec, half_width=half_width, n_points=n_points)
        alpha = alpha_oracle(spec, sol.pi)
        u = default_window(n_eff, m, alpha.alpha_bar_1, spec.j1)
        if args.delta_mode == "oracle":
            delta = default_delta(alpha, sol.z, spec.beta.sup_norm(), u)
        else:  # plugin
            delta = cfgmod.plugin_delta_from_config(cfg, u)
    l_hat = log_derivative_estimate(pi_hat, pi_prime_hat, delta)

    for name, g in (("pi_hat", pi_hat), ("pi_prime_hat", pi_prime_hat), ("l_hat", l_hat)):
        g.save(_outpath(args, f"{name}.txt"))
    print(f"delta = {delta!r} ({args.delta_mode}); wrote pi_hat.txt, "
          f"pi_prime_hat.txt, l_hat.txt in {args.out_dir}")


def cmd_estimate(args):
    cfg = cfgmod.load_config(args.config)
    spec = cfgmod.drift_spec_from_config(cfg)
    samples, _ = load_samples(args.samples)
    est_cfg = cfgmod.estimator_from_config(cfg, spec, n_samples=samples.size)
    result = run_pipeline(samples, est_cfg, spec.shape)
    result.save(args.out_dir)
    print(f"alpha_hat = {result.alpha_hat}")
    print(f"a_hat     = {result.a_hat}")
    print(f"wrote alpha.csv, a.csv, psi.csv, beta_prime.csv, diagnostics.txt "
          f"in {args.out_dir}")


def cmd_mc_study(args):
    cfg = cfgmod.load_config(args.config)
    plan = cfgmod.plan_from_config(cfg)
    if args.seed is not None:
        plan.base_seed = args.seed
    rows = run_experiment(plan, threads=args.threads)
    metrics = _outpath(args, "metrics.csv")
    timings = _outpath(args, "timings.csv")
    write_metrics_csv(rows, metrics, timings)
    failed = sum(r.status != "ok" for r in rows)
    print(f"wrote {len(rows)} rows to {metrics} ({failed} failures); "
          f"timings in {timings}")


def cmd_report(args):
    rows = read_metrics_csv(args.metrics)
    report = rate_report(rows)
    text = format_report(report)
    print(text)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mvdrift",
        description="Interacting-particle simulation and semiparametric "
                    "drift estimation for mean-field SDEs")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run the particle system and write samples")
    _common(p)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--t", type=float, default=None)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--stream", type=int, default=None)
    p.add_argument("--method", choices=["fast", "naive"], default="fast")
    p.add_argument("--raw", action="store_true",
                   help="write raw positions instead of projected ones")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("solve-invariant", help="solve the invariant density")
    _common(p)
    p.add_argument("--half-width", type=float, default=None)
    p.add_argument("--n-points", type=int, default=None)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--damping", type=float, default=0.5)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_solve_invariant)

    p = sub.add_parser("estimate-density",
                       help="kernel density/derivative/log-derivative estimates")
    _common(p)
    p.add_argument("--samples", required=True)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--h0", type=float, default=None)
    p.add_argument("--h1", type=float, default=None)
    p.add_argument("--delta-mode", choices=["oracle", "plugin", "fixed"],
                   default="oracle")
    p.add_argument("--delta", type=float, default=None)
    p.set_defaults(func=cmd_estimate_density)

    p = sub.add_parser("estimate", help="run the full four-step estimator")
    _common(p)
    p.add_argument("--samples", required=True)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("mc-study", help="Monte Carlo study over (N, T)")
    _common(p)
    p.set_defaults(func=cmd_mc_study)

    p = sub.add_parser("report", help="summarize a metrics CSV")
    p.add_argument("--metrics", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    args.func(args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
