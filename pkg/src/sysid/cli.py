"""Command-line entry points.

    sysid run        simulate streams and run the estimator comparison
    sysid summarize  aggregate a results CSV across seeds
    sysid params     print the conservative (theory) hyperparameters

``run`` layers its settings: built-in defaults, then an optional flat config
file (key = value per line, keys named like the flags), then explicit flags.
"""

import argparse
import sys

from . import estimators, harness, metrics, model
from .errors import (
    ConfigError,
    ConvergenceError,
    DefinitenessError,
    DegenerateNormBound,
    DimensionError,
    StabilityError,
)

_USER_ERRORS = (
    ConfigError,
    ConvergenceError,
    DefinitenessError,
    DegenerateNormBound,
    DimensionError,
    StabilityError,
    OSError,
    ValueError,
)


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="sysid",
        description="Streaming linear-system identification experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an estimator comparison and write a results CSV")
    run.add_argument("--config", metavar="PATH", help="flat key = value config file")
    run.add_argument("--d", help="state dimension")
    run.add_argument("--rho", help="top eigenvalue scale of the transition matrix")
    run.add_argument("--sigma", help="noise variance (covariance is sigma * I)")
    run.add_argument("--T", help="stream horizon (number of transitions)")
    run.add_argument("--B", help="buffer size override")
    run.add_argument("--u", help="buffer gap override")
    run.add_argument("--a", help="burn-in override (buffers excluded from the tail average)")
    run.add_argument("--alpha", help="gap exponent for the theory preset")
    run.add_argument("--preset", choices=harness.PRESETS, help="hyperparameter preset")
    run.add_argument("--estimators",
                     help="comma list from: " + ",".join(estimators.ESTIMATOR_KINDS))
    run.add_argument("--seeds", help="comma list of integer run seeds")
    run.add_argument("--out", help="output CSV path")
    run.add_argument("--start", choices=model.START_MODES, help="initial state mode")
    run.add_argument("--system", help="rand_bimod, scaled_identity, or a matrix file path")
    run.add_argument("--gamma-rule", dest="gamma_rule", choices=harness.GAMMA_RULES,
                     help="step-size rule for the experiment preset")
    run.add_argument("--R-rule", dest="norm_rule",
                     help="squared | norms | explicit positive bound")

    summ = sub.add_parser("summarize", help="aggregate final errors in a results CSV")
    summ.add_argument("--in", dest="in_path", required=True, metavar="PATH")

    params = sub.add_parser("params", help="print theory-preset hyperparameters")
    params.add_argument("--T", required=True, type=int)
    params.add_argument("--rho", required=True, type=float)
    params.add_argument("--alpha", type=float, default=22.0)
    params.add_argument("--d", type=int, default=5)
    params.add_argument("--sigma", type=float, default=1.0)
    return parser


def _cmd_run(args):
    overrides = {
        "d": args.d,
        "rho": args.rho,
        "sigma": args.sigma,
        "T": args.T,
        "B": args.B,
        "u": args.u,
        "a": args.a,
        "alpha": args.alpha,
        "preset": args.preset,
        "estimators": args.estimators,
        "seeds": args.seeds,
        "out": args.out,
        "start": args.start,
        "system": args.system,
        "gamma-rule": args.gamma_rule,
        "R-rule": args.norm_rule,
    }
    cfg = harness.parse_config(args.config, overrides)
    result = harness.run_experiment(cfg)
    csv_path, manifest_path = harness.save_results(result)
    total = sum(stat.wall_clock_s for stat in result.run_stats)
    rows = sum(len(curve.records) for curve in result.curves)
    print(f"wrote {csv_path} ({len(result.curves)} runs, {rows} rows) "
          f"and {manifest_path}; estimator time {total:.2f}s")
    return 0


_SUMMARY_COLUMNS = (
    "estimator",
    "n_seeds",
    "param_err_mean",
    "param_err_std",
    "pred_excess_mean",
    "pred_excess_std",
    "param_err_vs_ols",
    "pred_excess_vs_ols",
)


def _cmd_summarize(args):
    curves = harness.load_results(args.in_path)
    rows = metrics.summarize(curves)
    print("  ".join(_SUMMARY_COLUMNS))
    for row in rows:
        cells = [row.estimator, str(row.n_seeds)]
        for value in (
            row.param_err_mean,
            row.param_err_std,
            row.pred_excess_mean,
            row.pred_excess_std,
            row.param_err_vs_ols,
            row.pred_excess_vs_ols,
        ):
            cells.append("-" if value is None else repr(value))
        print("  ".join(cells))
    return 0


def _cmd_params(args):
    hp = model.pick_hyperparams(
        args.T,
        args.d,
        spectral_bound=args.rho,
        noise_trace=args.sigma * args.d,
        alpha=args.alpha,
        preset="theory",
    )
    print(f"preset = theory")
    print(f"T = {hp.horizon}")
    print(f"alpha = {hp.gap_exponent}")
    print(f"u = {hp.gap}")
    print(f"B = {hp.buffer_size}")
    print(f"S = {hp.stride}")
    print(f"N = {hp.n_buffers}")
    print(f"R = {hp.norm_bound!r}")
    print(f"gamma = {hp.step_size!r}")
    print(f"a = {hp.burn_in}")
    return 0


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    handler = {"run": _cmd_run, "summarize": _cmd_summarize, "params": _cmd_params}[
        args.command
    ]
    try:
        return handler(args)
    except _USER_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
