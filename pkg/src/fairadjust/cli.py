"""Command-line interface.

Subcommands: adjust, predict, evaluate, crossval, sweep, synth,
experiment. Every subcommand is a pure function of its input files,
flags and --seed (default 0, never wall-clock entropy), and all output
files are written atomically (temp file + rename).

Exit codes: 0 success, 10 ingestion error, 11 estimation error (e.g. an
empty (Y, A) cell), 12 infeasible LP, 13 solver iteration limit,
1 anything else.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Any

import numpy as np

from .data_model import DataError, load_dataset, save_dataset
from .estimation import EstimationError, fit_empirical
from .evaluation import (CrossvalResult, crossval, evaluate_analytic, evaluate_sampled,
                         fairness_sweep, remap_to_policy)
from .fairness_lp import CRITERIA, FairnessSpec, ObjectiveSpec
from .lp_solver import INFEASIBLE, ITERATION_LIMIT, SolverError
from .policy import AdjustmentPolicy, PolicyError, fit_policy, predict_rows
from .synth import (BIAS_LEVELS, CLASS_BALANCE, GROUP_BALANCE, RegimeSpec, full_grid,
                    format_regression_table, generate, ols_fit, run_grid, GRID_COLUMNS)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_DATA = 10
EXIT_ESTIMATION = 11
EXIT_INFEASIBLE = 12
EXIT_ITERATION_LIMIT = 13


def _atomic_write(path: str, text: str) -> None:
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _json_text(obj: Any) -> str:
    return json.dumps(obj, indent=1) + "\n"


def _csv_text(columns, rows) -> str:
    out = [",".join(columns)]
    for row in rows:
        out.append(",".join(_csv_cell(row[c]) for c in columns))
    return "\n".join(out) + "\n"


def _csv_cell(val) -> str:
    if isinstance(val, (bool, np.bool_)):
        return "true" if val else "false"
    if isinstance(val, float):
        return repr(float(val))     # plain shortest form even for numpy scalars
    return str(val)


def _load(args) -> Any:
    return load_dataset(args.input, y_col=args.y_col, yhat_col=args.yhat_col,
                        a_col=args.a_col)


def cmd_adjust(args) -> int:
    ds = _load(args)
    em = fit_empirical(ds, args.smoothing)
    spec = FairnessSpec(criterion=args.criterion, epsilon=args.epsilon)
    obj = ObjectiveSpec(kind=args.objective)
    policy = fit_policy(em, obj, spec, smoothing=args.smoothing, seed=args.seed)
    report = evaluate_analytic(policy, em)
    _atomic_write(args.output, _json_text(policy.to_dict()))
    report_path = args.report or os.path.splitext(args.output)[0] + ".report.json"
    _atomic_write(report_path, _json_text(report.to_dict()))
    print(f"adjusted: objective={policy.meta.objective_value!r} "
          f"disparity={report.disparity!r} -> {args.output}")
    return EXIT_OK


def cmd_predict(args) -> int:
    policy = AdjustmentPolicy.load(args.policy)
    ds = _load(args)
    y, y_hat, a = remap_to_policy(policy, ds)
    y_adj = predict_rows(policy, y_hat, a, args.seed)
    lines = [f"{args.y_col},{args.yhat_col},{args.a_col},y_adj"]
    for i in range(ds.n):
        lines.append(",".join([policy.class_names[y[i]], policy.class_names[y_hat[i]],
                               policy.group_names[a[i]], policy.class_names[y_adj[i]]]))
    _atomic_write(args.output, "\n".join(lines) + "\n")
    print(f"predicted {ds.n} rows -> {args.output}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    policy = AdjustmentPolicy.load(args.policy)
    ds = _load(args)
    report = evaluate_sampled(policy, ds, args.seed)
    _atomic_write(args.output, _json_text(report.to_dict()))
    print(f"evaluated {ds.n} rows -> {args.output}")
    return EXIT_OK


def cmd_crossval(args) -> int:
    ds = _load(args)
    spec = FairnessSpec(criterion=args.criterion, epsilon=args.epsilon)
    obj = ObjectiveSpec(kind=args.objective)
    result: CrossvalResult = crossval(ds, args.folds, args.seed, obj, spec,
                                      smoothing=args.smoothing)
    _atomic_write(args.output, _json_text(result.to_dict()))
    ch = result.percent_change
    print(f"crossval: accuracy {ch['accuracy']:+.1f}% mean_tdr {ch['mean_tdr']:+.1f}% "
          f"disparity {ch['disparity']:+.1f}% -> {args.output}")
    return EXIT_OK


SWEEP_COLUMNS = ("epsilon", "criterion", "objective_value", "brier", "sweep_measure",
                 "accuracy", "mean_tdr", "trivial", "status")


def cmd_sweep(args) -> int:
    ds = _load(args)
    em = fit_empirical(ds, args.smoothing)
    criteria = CRITERIA if args.criterion == "all" else (args.criterion,)
    rows = fairness_sweep(em, ObjectiveSpec(kind=args.objective), criteria=criteria)
    _atomic_write(args.output, _csv_text(SWEEP_COLUMNS, rows))
    print(f"sweep: {len(rows)} rows -> {args.output}")
    return EXIT_OK


def cmd_synth(args) -> int:
    spec = RegimeSpec(groups=args.groups, class_balance=args.class_balance,
                      group_balance=args.group_balance, pred_bias=args.pred_bias,
                      n=args.n, seed=args.seed)
    ds = generate(spec)
    save_dataset(ds, args.output, y_col=args.y_col, yhat_col=args.yhat_col,
                 a_col=args.a_col)
    print(f"synthesized {ds.n} rows -> {args.output}")
    return EXIT_OK


def cmd_experiment(args) -> int:
    rows = run_grid(args.seed, n=args.n)
    os.makedirs(args.output_dir, exist_ok=True)
    table_path = os.path.join(args.output_dir, "experiment.csv")
    _atomic_write(table_path, _csv_text(GRID_COLUMNS, rows))
    n_datasets = len(full_grid(args.seed, n=args.n))
    print(f"experiment: {n_datasets} datasets, {len(rows)} adjustments -> {table_path}")
    for groups in (2, 3):
        sub = [r for r in rows if r["groups"] == groups]
        fits = {out: ols_fit(sub, out) for out in ("acc_change", "tdr_change")}
        text = format_regression_table(
            f"Synthetic experiments with {groups} protected groups", fits)
        path = os.path.join(args.output_dir, f"regression_groups{groups}.txt")
        _atomic_write(path, text)
        print(f"regression ({groups} groups) -> {path}")
    return EXIT_OK


def _add_io_columns(p: argparse.ArgumentParser) -> None:
    p.add_argument("--y-col", default="y", help="true-label column name")
    p.add_argument("--yhat-col", default="y_hat", help="predicted-label column name")
    p.add_argument("--a-col", default="a", help="protected-group column name")


def _add_lp_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--criterion", default="term-by-term", choices=CRITERIA)
    p.add_argument("--objective", default="weighted", choices=("unweighted", "weighted"))
    p.add_argument("--epsilon", type=float, default=0.0,
                   help="relaxation bound per fairness scalar (0 = exact)")
    p.add_argument("--smoothing", type=float, default=0.0,
                   help="additive smoothing per conditional count")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fairadjust",
        description="Post-process blackbox multiclass predictions into a "
                    "randomized group-fair predictor.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("adjust", help="solve the LP and write policy + report")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True, help="policy JSON path")
    p.add_argument("--report", default=None,
                   help="report JSON path (default: <output>.report.json)")
    _add_lp_flags(p)
    _add_io_columns(p)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_adjust)

    p = sub.add_parser("predict", help="sample adjusted labels for a dataset")
    p.add_argument("--policy", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    _add_io_columns(p)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="sampled evaluation of a policy on a dataset")
    p.add_argument("--policy", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    _add_io_columns(p)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("crossval", help="k-fold out-of-sample adjustment study")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--folds", type=int, default=5)
    _add_lp_flags(p)
    _add_io_columns(p)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_crossval)

    p = sub.add_parser("sweep", help="fairness-discrimination sweep over epsilon")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--criterion", default="all", choices=CRITERIA + ("all",))
    p.add_argument("--objective", default="weighted", choices=("unweighted", "weighted"))
    p.add_argument("--smoothing", type=float, default=0.0)
    _add_io_columns(p)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("synth", help="generate one synthetic regime as CSV")
    p.add_argument("--output", required=True)
    p.add_argument("--groups", type=int, default=2, choices=(2, 3))
    p.add_argument("--class-balance", default="balanced", choices=tuple(CLASS_BALANCE))
    p.add_argument("--group-balance", default="no-minority",
                   choices=tuple(GROUP_BALANCE[3]))
    p.add_argument("--pred-bias", default="low",
                   choices=BIAS_LEVELS[2] + BIAS_LEVELS[3])
    p.add_argument("--n", type=int, default=1000)
    _add_io_columns(p)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("experiment",
                       help="full factorial grid + OLS regression tables")
    p.add_argument("--output-dir", default=".")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_experiment)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (DataError, PolicyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except EstimationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION
    except SolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if exc.status == INFEASIBLE:
            return EXIT_INFEASIBLE
        if exc.status == ITERATION_LIMIT:
            return EXIT_ITERATION_LIMIT
        return EXIT_ERROR
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
