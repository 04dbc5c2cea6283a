"""Command line entry point: ``isstop {ess-curve,stop-study,gaussian-oracle}``."""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .errors import IsStopError
from .estimators import EstimatorKind
from .gaussian import make_setting
from .harness import (
    THREADS_ENV,
    ExperimentConfig,
    run_ess_curve,
    run_stopping_study,
    write_curve,
    write_study,
)
from .stopping import DEFAULT_CHECK_EVERY, DEFAULT_MAX_N


def _grid(text):
    try:
        return tuple(int(float(x)) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must be comma-separated integers, got {text!r}")


def _add_problem_args(p):
    p.add_argument("--problem", default="gaussian",
                   help="gaussian, gaussian-identity, weibull-h1 or weibull-h2")
    p.add_argument("--setting", type=int, default=1, choices=(1, 2, 3))
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--estimator", default="SNIS", choices=("SNIS", "UIS", "snis", "uis"))
    p.add_argument("--reps", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output CSV path")


def _add_stop_args(p):
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--nstar", type=int, default=None)
    p.add_argument("--check-every", type=int, default=DEFAULT_CHECK_EVERY)
    p.add_argument("--max-n", type=int, default=DEFAULT_MAX_N)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="isstop",
        description="Importance sampling ESS and stopping-rule experiments.",
        epilog=f"Set {THREADS_ENV} to run replications on several threads.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    curve = sub.add_parser("ess-curve", help="ESS estimates over a grid of sample sizes")
    _add_problem_args(curve)
    curve.add_argument("--grid", type=_grid, required=True,
                       help="comma-separated sample sizes, e.g. 1000,5000,10000")

    study = sub.add_parser("stop-study", help="replicated runs of the stopping rule")
    _add_problem_args(study)
    _add_stop_args(study)

    oracle = sub.add_parser("gaussian-oracle", help="closed-form covariances for a setting")
    oracle.add_argument("--setting", type=int, default=1, choices=(1, 2, 3))
    oracle.add_argument("--dim", type=int, default=2)
    return parser


def _config(args, **extra):
    problem, integrand = args.problem, "h1"
    if problem.startswith("weibull"):
        problem, _, integrand = problem.partition("-")
        integrand = integrand or "h1"
    return ExperimentConfig(
        problem=problem,
        setting=args.setting,
        dim=args.dim,
        integrand=integrand,
        estimator=args.estimator,
        replications=args.reps,
        seed=args.seed,
        **extra,
    )


def _print_matrix(name, m):
    print(f"{name} =")
    with np.printoptions(precision=6, suppress=True, linewidth=120):
        print(m)


def _oracle(args):
    prob = make_setting(args.setting, args.dim)
    _print_matrix("Lambda", prob.lam)
    _print_matrix("Upsilon", prob.upsilon)
    _print_matrix("Omega (SNIS)", prob.true_omega_snis())
    _print_matrix("Omega_U (UIS)", prob.true_omega_uis())
    for kind in EstimatorKind:
        print(f"true M-ESS/n ({kind.value}) = {prob.true_mess_ratio(kind):.6f}")
        uni = ", ".join(f"{v:.6f}" for v in prob.true_univariate_ratio(kind))
        print(f"true univariate ESS/n ({kind.value}) = [{uni}]")


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "gaussian-oracle":
            _oracle(args)
        elif args.command == "ess-curve":
            cfg = _config(args, grid=args.grid)
            summary = write_curve(run_ess_curve(cfg), cfg, args.out)
            print(f"wrote {args.out} and {summary}")
        else:
            cfg = _config(args, alpha=args.alpha, epsilon=args.epsilon, n_star=args.nstar,
                          check_every=args.check_every, max_n=args.max_n)
            result = run_stopping_study(cfg)
            write_study(result, cfg, args.out)
            for k, v in result.summary.items():
                print(f"{k}={v}")
    except IsStopError as exc:
        print(f"isstop: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
