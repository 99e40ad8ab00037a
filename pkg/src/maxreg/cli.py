"""Command line entry point: ``maxreg <subcommand> ...``.

Exit codes: 0 success, 2 configuration errors, 3 numerical failures or Dini
violations.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from maxreg.config import ConfigError, RunConfig, load_config
from maxreg.engine import ConvergenceError, DiniViolation
from maxreg.forms import HypothesisError, certify_bounds, estimate_modulus
from maxreg.harness import (
    DEFAULT_SWEEP_ALPHAS,
    SolverFailure,
    build_problem,
    dini_classify,
    emit_report,
    exponent_sweep,
    make_quadrature,
    regularity_report,
    solve_on_grid,
    verify_maxreg,
)
from maxreg.operators import SectorError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
NUMERIC_ERRORS = (
    DiniViolation, HypothesisError, ConvergenceError, SectorError, SolverFailure,
    np.linalg.LinAlgError, FloatingPointError,
)

log = logging.getLogger("maxreg")


def _problem(cfg: RunConfig, alpha: float | None = None):
    return build_problem(
        cfg.example, cfg.p, cfg.alpha if alpha is None else alpha, n=cfg.mesh_n,
        u0_class=cfg.u0_class, u0_seed=cfg.u0_seed, f_kind=cfg.f_kind, f_seed=cfg.f_seed,
        tau=cfg.tau, beta_gamma=cfg.beta_gamma,
    )


def _write(cfg: RunConfig, report, suffixes=("json", "csv")) -> None:
    for fmt in suffixes:
        path = emit_report(report, fmt, f"{cfg.output}.{fmt}")
        print(f"wrote {path}")


def cmd_check_hypotheses(cfg: RunConfig) -> int:
    prob = _problem(cfg)
    ff, e = prob.family, prob.expected
    bounds = certify_bounds(ff, np.linspace(0.0, cfg.tau, 17))
    mod = estimate_modulus(ff, e.beta, e.gamma)
    dini = dini_classify(cfg.alpha, e.gamma, e.beta, cfg.p, cfg.tau)
    out = {
        "example": cfg.example, "n": ff.dim, "bounds": asdict(bounds),
        "expected": e.as_dict(),
        "modulus": {"holder_alpha": mod.holder_alpha, "holder_C": mod.holder_C,
                    "r_squared": mod.r_squared, "accepted": mod.accepted},
        "dini": asdict(dini), "admissible": dini.admissible(prob.with_data),
    }
    path = Path(f"{cfg.output}.json")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(out, indent=2))
    print(json.dumps(out, indent=2))
    return EXIT_OK


def cmd_solve(cfg: RunConfig) -> int:
    prob = _problem(cfg)
    quad = make_quadrature(prob.expected, cfg.alpha, **cfg.quadrature_kwargs())
    gs = solve_on_grid(prob, max(cfg.grids), quad, cfg.mu_shift)
    report = regularity_report(prob, [gs])
    _write(cfg, report)
    print(f"N={gs.N} C_est={report.C_est:.6g} neumann_iters={gs.solution.neumann_iters}")
    return EXIT_OK


def cmd_verify(cfg: RunConfig) -> int:
    prob = _problem(cfg)
    quad = make_quadrature(prob.expected, cfg.alpha, **cfg.quadrature_kwargs())
    report = verify_maxreg(prob, cfg.grids, quad, cfg.mu_shift, q_samples=10)
    _write(cfg, report)
    for N, c in report.refinement_trace:
        print(f"N={N} C_est={c:.6g}")
    print(f"admissible={report.admissible} stable={report.stable}")
    return EXIT_OK


def cmd_sweep(cfg: RunConfig) -> int:
    alphas = sorted(set(DEFAULT_SWEEP_ALPHAS) | {cfg.alpha})
    rows = exponent_sweep(
        cfg.example, alphas, cfg.p, cfg.grids, n=cfg.mesh_n, u0_class=cfg.u0_class,
        u0_seed=cfg.u0_seed, f_kind=cfg.f_kind, f_seed=cfg.f_seed, tau=cfg.tau,
        beta_gamma=cfg.beta_gamma,
    )
    _write(cfg, [r.report for r in rows])
    for r in rows:
        cs = ", ".join(f"{c:.4g}" for _, c in r.trace)
        print(f"alpha={r.alpha:<5g} admissible={r.admissible_theory!s:<5} stable={r.stable!s:<5} C_est=[{cs}]")
    return EXIT_OK


def cmd_dini(args) -> int:
    res = dini_classify(args.alpha, args.gamma, args.beta, args.p, args.tau)
    print(json.dumps(asdict(res)))
    return EXIT_OK if res.cond_main else EXIT_NUMERIC


COMMANDS = {
    "check-hypotheses": cmd_check_hypotheses,
    "solve": cmd_solve,
    "verify-maxreg": cmd_verify,
    "sweep": cmd_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="maxreg", description="Maximal regularity experiments for time-dependent forms.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("config", type=Path)
    d = sub.add_parser("dini", help="closed-form Dini classification for omega(t) = t^alpha")
    for flag in ("alpha", "beta", "gamma", "p"):
        d.add_argument(f"--{flag}", type=float, required=True)
    d.add_argument("--tau", type=float, default=1.0)
    return ap


def run_config(path: str | Path, command: str) -> int:
    """Load ``path`` and execute ``command``; returns the exit code."""
    try:
        cfg = load_config(path)
    except FileNotFoundError:
        print(f"config error: no such file {path}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[command](cfg)
    except DiniViolation as exc:
        print(f"Dini violation: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except NUMERIC_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (TypeError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if args.command == "dini":
        try:
            return cmd_dini(args)
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
    return run_config(args.config, args.command)


if __name__ == "__main__":
    sys.exit(main())
