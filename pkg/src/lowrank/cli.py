"""Command-line front end: penalty tables, fitting, selection, CV, simulation.

All commands echo their fully resolved configuration (defaults included)
as JSON on stdout, and written JSON reports embed the same block, so
every artifact records how it was produced.  Randomness always flows
from an explicit seed; a missing seed is drawn once and echoed.

Exit codes: 0 success, 2 argument errors, 3 infeasibility, 4 I/O
failures; errors are reported as machine-readable JSON on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import io
from .errors import InfeasibleError, LowRankError
from .kyfan import kyfan_table
from .regression import fit_path
from .selection import (DEFAULT_ALPHA, DEFAULT_CV_FOLDS, DEFAULT_K,
                        cross_validate_k, select_rank)
from .simulate import ExperimentConfig, run_experiment

__all__ = ["main", "main_entry"]

_DEFAULT_GRID_SPEC = "1.2:3.0:0.2"


class _ArgumentError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _ArgumentError(message)


def _resolve_seed(seed: int | None) -> int:
    if seed is not None:
        return int(seed)
    return int(np.random.SeedSequence().entropy % (2**63))


def _parse_grid(text: str) -> list[float]:
    """Grid spec: 'start:stop:step' (inclusive) or a comma-separated list."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"grid must be start:stop:step, got {text!r}")
        start, stop, step = (float(x) for x in parts)
        if step <= 0 or stop < start:
            raise ValueError(f"invalid grid range {text!r}")
        values, i = [], 0
        while start + i * step <= stop + 1e-9:
            values.append(round(start + i * step, 10))
            i += 1
        return values
    values = [float(x) for x in text.split(",") if x.strip()]
    if not values:
        raise ValueError(f"empty grid {text!r}")
    return values


def _echo(command: str, config: dict, outputs: dict) -> None:
    print(json.dumps({"command": command, "config": config,
                      "outputs": outputs}))


def _cmd_skf(args) -> None:
    seed = _resolve_seed(args.seed)
    config = {"q": args.q, "n": args.n, "method": args.method,
              "nsim": args.nsim, "seed": seed, "eps": args.eps,
              "out": args.out, "out_json": args.out_json}
    table = kyfan_table(args.q, args.n, policy=args.method,
                        nsim=args.nsim, seed=seed, eps=args.eps)
    config["resolved_method"] = table.method
    io.write_kyfan_csv(args.out, table)
    outputs = {"table_csv": args.out}
    if args.out_json:
        payload = io.kyfan_to_dict(table)
        payload["config"] = config
        io.write_json(args.out_json, payload)
        outputs["table_json"] = args.out_json
    _echo("skf", config, outputs)


def _cmd_fit(args) -> None:
    config = {"x": args.x, "y": args.y, "rank": args.rank,
              "out_coef": args.out_coef, "out_fitted": args.out_fitted}
    X = io.read_matrix(args.x)
    Y = io.read_matrix(args.y)
    path = fit_path(X, Y)
    io.write_matrix(args.out_coef, path.coefficients(args.rank))
    outputs = {"coef_csv": args.out_coef}
    if args.out_fitted:
        io.write_matrix(args.out_fitted, path.fitted(args.rank))
        outputs["fitted_csv"] = args.out_fitted
    _echo("fit", config, outputs)


def _cmd_select(args) -> None:
    if args.method == "kf-known" and args.sigma2 is None:
        raise ValueError("--method kf-known requires --sigma2")
    if args.method == "rsc" and args.lam is None:
        raise ValueError("--method rsc requires --lambda")
    X = io.read_matrix(args.x)
    Y = io.read_matrix(args.y)
    path = fit_path(X, Y)
    config = {"x": args.x, "y": args.y, "method": args.method, "k": args.k,
              "sigma2": args.sigma2, "lambda": args.lam, "alpha": args.alpha,
              "r_max": args.r_max, "table_policy": "auto", "nsim": 200,
              "table_seed": 0, "eps": 1e-9, "out": args.out}
    report = select_rank(path, method=args.method, Y=Y, K=args.k,
                         lam=args.lam, sigma2=args.sigma2, r_max=args.r_max,
                         alpha=args.alpha)
    config["r_max"] = int(report.r_max)
    payload = io.report_to_dict(report)
    payload["config"] = config
    io.write_json(args.out, payload)
    _echo("select", config, {"report_json": args.out})


def _cmd_cv(args) -> None:
    seed = _resolve_seed(args.seed)
    grid = _parse_grid(args.grid)
    X = io.read_matrix(args.x)
    Y = io.read_matrix(args.y)
    config = {"x": args.x, "y": args.y, "method": args.method, "grid": grid,
              "folds": args.folds, "seed": seed, "alpha": args.alpha,
              "table_policy": "auto", "nsim": 200, "table_seed": 0,
              "eps": 1e-9, "out": args.out}
    result = cross_validate_k(X, Y, args.method, k_grid=grid,
                              folds=args.folds, seed=seed, alpha=args.alpha)
    payload = io.cv_result_to_dict(result)
    payload["config"] = config
    io.write_json(args.out, payload)
    _echo("cv", config, {"report_json": args.out})


def _cmd_simulate(args) -> None:
    with open(args.config) as fh:
        raw = json.load(fh)
    if "seed" not in raw:
        raw["seed"] = _resolve_seed(None)
    config = ExperimentConfig.from_dict(raw)
    result = run_experiment(config)
    io.write_json(args.out_json, result.to_dict())
    io.write_experiment_csv(args.out_csv, result)
    _echo("simulate", config.to_dict(),
          {"result_json": args.out_json, "records_csv": args.out_csv})


def build_parser() -> _Parser:
    parser = _Parser(prog="lowrank",
                     description="Reduced-rank regression with penalized "
                                 "rank selection")
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    p = sub.add_parser("skf", help="tabulate expected Ky-Fan norms")
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--method", choices=["auto", "mc", "mp"], default="auto")
    p.add_argument("--nsim", type=int, default=200)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--eps", type=float, default=1e-9)
    p.add_argument("--out", required=True)
    p.add_argument("--out-json", default=None)
    p.set_defaults(handler=_cmd_skf)

    p = sub.add_parser("fit", help="rank-constrained least-squares fit")
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--rank", type=int, required=True)
    p.add_argument("--out-coef", required=True)
    p.add_argument("--out-fitted", default=None)
    p.set_defaults(handler=_cmd_fit)

    p = sub.add_parser("select", help="select the rank by a penalized criterion")
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--method", choices=["kf", "kf-known", "rsc", "rsci"],
                   required=True)
    p.add_argument("--k", type=float, default=DEFAULT_K)
    p.add_argument("--sigma2", type=float, default=None)
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    p.add_argument("--r-max", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_select)

    p = sub.add_parser("cv", help="tune K by V-fold cross-validation")
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--method", choices=["kf", "rsci"], required=True)
    p.add_argument("--grid", default=_DEFAULT_GRID_SPEC)
    p.add_argument("--folds", type=int, default=DEFAULT_CV_FOLDS)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_cv)

    p = sub.add_parser("simulate", help="run a replicated experiment")
    p.add_argument("--config", required=True)
    p.add_argument("--out-json", required=True)
    p.add_argument("--out-csv", required=True)
    p.set_defaults(handler=_cmd_simulate)
    return parser


def _fail(status: int, code: str, message: str) -> int:
    print(json.dumps({"error": {"code": code, "message": message}}),
          file=sys.stderr)
    return status


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args.handler(args)
        return 0
    except _ArgumentError as exc:
        return _fail(2, "argument-error", str(exc))
    except (ValueError, TypeError) as exc:
        return _fail(2, "argument-error", str(exc))
    except InfeasibleError as exc:
        return _fail(3, exc.code, str(exc))
    except OSError as exc:
        return _fail(4, "io-error", str(exc))
    except LowRankError as exc:
        return _fail(1, exc.code, str(exc))


def main_entry() -> None:
    sys.exit(main())
