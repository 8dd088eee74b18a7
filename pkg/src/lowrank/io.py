"""File formats: headerless CSV matrices, Ky-Fan tables, JSON reports.

Matrices travel as headerless comma-separated decimals (dimensions
inferred from the file); all floats are printed with 12 significant
digits.  Structured outputs (tables, selection reports, CV results,
experiment results) serialize to JSON; matching schemas ship in
``lowrank/schemas``.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from importlib import resources

import numpy as np

from .kyfan import KyFanTable
from .selection import CvResult, SelectionReport
from .simulate import ExperimentResult

__all__ = [
    "read_matrix",
    "write_matrix",
    "write_kyfan_csv",
    "kyfan_to_dict",
    "report_to_dict",
    "cv_result_to_dict",
    "write_experiment_csv",
    "write_json",
    "load_schema",
]

FLOAT_FMT = "%.12g"


def read_matrix(path) -> np.ndarray:
    """Read a headerless CSV matrix of decimal floats."""
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)  # empty-file notice
            a = np.loadtxt(path, delimiter=",", ndmin=2, dtype=float)
    except ValueError as exc:
        raise ValueError(f"could not parse matrix from {path}: {exc}") from exc
    if a.size == 0:
        raise ValueError(f"matrix file {path} is empty")
    return a


def write_matrix(path, a) -> None:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got ndim={a.ndim}")
    np.savetxt(path, a, delimiter=",", fmt=FLOAT_FMT)


def write_kyfan_csv(path, table: KyFanTable) -> None:
    """Write a table as ``r,s`` rows, one per rank."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["r", "s"])
        for r, s in enumerate(table.values, start=1):
            w.writerow([r, FLOAT_FMT % s])


def kyfan_to_dict(table: KyFanTable) -> dict:
    out = {"q": table.q, "n": table.n, "method": table.method,
           "nsim": table.nsim, "seed": table.seed,
           "values": [float(v) for v in table.values]}
    if table.se_sq is not None:
        out["se_sq"] = [float(v) for v in table.se_sq]
    return out


def _clean_float(x):
    if x is None:
        return None
    x = float(x)
    return None if math.isnan(x) else x


def report_to_dict(report: SelectionReport) -> dict:
    return {"method": report.method,
            "r_hat": int(report.r_hat),
            "K": _clean_float(report.K),
            "lambda": _clean_float(report.lam),
            "sigma2": _clean_float(report.sigma2),
            "r_max": int(report.r_max),
            "r": [int(r) for r in report.candidates],
            "rss": [float(v) for v in report.rss],
            "penalty": [float(v) for v in report.penalty],
            "criterion": [float(v) for v in report.criterion]}


def cv_result_to_dict(result: CvResult) -> dict:
    return {"K": result.K,
            "grid": list(result.grid),
            "folds": result.folds,
            "seed": result.seed,
            "cv_error": {f"{k:g}": v for k, v in result.cv_errors.items()},
            "skipped": {f"{k:g}": msg for k, msg in result.skipped.items()},
            "report": report_to_dict(result.report)}


def write_experiment_csv(path, result: ExperimentResult) -> None:
    """Long-format per-replicate records for downstream plotting."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["replicate", "estimator", "ratio", "r_hat"])
        for rec in result.records:
            w.writerow([rec.replicate, rec.estimator,
                        "nan" if math.isnan(rec.ratio) else FLOAT_FMT % rec.ratio,
                        rec.r_hat])


def write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")


def load_schema(name: str) -> dict:
    """Load one of the shipped JSON schemas by bare name."""
    ref = resources.files("lowrank.schemas").joinpath(f"{name}.schema.json")
    return json.loads(ref.read_text())
