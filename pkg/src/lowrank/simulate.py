"""Synthetic experiments comparing the rank selectors.

The generating model is Y = X A + sigma * E with X rows drawn from a
centered Gaussian with AR(1) covariance rho^|i-j|, A = b * B1 B2 a
random matrix of exact rank r, and E standard normal.  Each replicate
fits the rank path once, runs every configured selector on it, and
scores the selected fit against the fixed-rank oracle fit on the same
data through the truncated error ratio

    min( ||XA - XA_hat||^2 / ||XA - XA_oracle||^2 , 10 ).

Replicates own independent RNG streams spawned from the experiment
seed, so runs are reproducible and parallelism cannot change results.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import toeplitz

from ._threads import map_indexed
from .errors import InfeasibleError
from .regression import fit_path
from .selection import (DEFAULT_CV_FOLDS, DEFAULT_CV_GRID, DEFAULT_K,
                        cross_validate_k, select_rank)

__all__ = [
    "EstimatorSpec",
    "ExperimentConfig",
    "ReplicateRecord",
    "EstimatorSummary",
    "ExperimentResult",
    "sample_design",
    "sample_coefficients",
    "sample_response",
    "ratio_metric",
    "run_experiment",
    "RATIO_CAP",
]

RATIO_CAP = 10.0

_METHODS = ("kf", "kf-known", "rsc", "rsci", "kf-cv", "rsci-cv")


def sample_design(m: int, p: int, rho: float, seed) -> np.ndarray:
    """m-by-p design with i.i.d. rows from N(0, Sigma), Sigma_ij = rho^|i-j|."""
    if m < 1 or p < 1:
        raise ValueError(f"dimensions must be positive, got m={m}, p={p}")
    if not abs(rho) < 1:
        raise ValueError(f"|rho| must be below 1, got {rho}")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((m, p))
    if rho == 0:
        return z
    cov = toeplitz(rho ** np.arange(p))
    return z @ np.linalg.cholesky(cov).T


def sample_coefficients(p: int, n: int, r: int, b: float, seed) -> np.ndarray:
    """p-by-n coefficient matrix b * B1 B2 of rank r (a.s., for b != 0)."""
    if not 0 <= r <= min(p, n):
        raise ValueError(f"rank must lie in 0..{min(p, n)}, got {r}")
    rng = np.random.default_rng(seed)
    b1 = rng.standard_normal((p, r))
    b2 = rng.standard_normal((r, n))
    return b * (b1 @ b2)


def sample_response(X, A, sigma: float, seed) -> np.ndarray:
    """Response Y = X A + sigma * E with standard normal E."""
    X = np.asarray(X, dtype=float)
    A = np.asarray(A, dtype=float)
    if X.shape[1] != A.shape[0]:
        raise ValueError(
            f"inner dimensions disagree: X is {X.shape}, A is {A.shape}")
    if sigma < 0:
        raise ValueError(f"sigma must be nonnegative, got {sigma}")
    rng = np.random.default_rng(seed)
    return X @ A + sigma * rng.standard_normal((X.shape[0], A.shape[1]))


def ratio_metric(xa_hat, xa_oracle, xa_true) -> float:
    """Squared-error ratio of a selected fit to the fixed-rank oracle fit,
    truncated at 10.  Returns NaN when the oracle error is zero (only
    reachable in noiseless runs); such records are flagged and excluded
    from aggregates."""
    xa_hat = np.asarray(xa_hat, dtype=float)
    xa_oracle = np.asarray(xa_oracle, dtype=float)
    xa_true = np.asarray(xa_true, dtype=float)
    if not xa_hat.shape == xa_oracle.shape == xa_true.shape:
        raise ValueError("all three matrices must share one shape")
    den = float(np.sum((xa_true - xa_oracle) ** 2))
    if den == 0.0:
        return math.nan
    num = float(np.sum((xa_true - xa_hat) ** 2))
    return min(num / den, RATIO_CAP)


def _fmt(x: float) -> str:
    return f"{x:g}"


@dataclass(frozen=True)
class EstimatorSpec:
    """One selector to evaluate: a method plus its tuning inputs."""

    method: str
    K: float = DEFAULT_K
    lam: float | None = None
    sigma2: float | None = None
    grid: tuple[float, ...] = DEFAULT_CV_GRID
    folds: int = DEFAULT_CV_FOLDS

    def __post_init__(self):
        if self.method not in _METHODS:
            raise ValueError(f"unknown estimator method {self.method!r}")
        if self.method == "rsc" and self.lam is None:
            raise ValueError("method 'rsc' requires lambda")

    @property
    def label(self) -> str:
        if self.method == "kf":
            return f"KF[K={_fmt(self.K)}]"
        if self.method == "kf-known":
            return f"KF-known[K={_fmt(self.K)}]"
        if self.method == "rsci":
            return f"RSCI[K={_fmt(self.K)}]"
        if self.method == "rsc":
            return f"RSC[lambda={_fmt(self.lam)}]"
        if self.method == "kf-cv":
            return "KF[K=CV]"
        return "RSCI[K=CV]"

    def to_dict(self) -> dict:
        out = {"method": self.method}
        if self.method in ("kf", "kf-known", "rsci"):
            out["K"] = self.K
        if self.method == "rsc":
            out["lambda"] = self.lam
        if self.method == "kf-known" and self.sigma2 is not None:
            out["sigma2"] = self.sigma2
        if self.method.endswith("-cv"):
            out["grid"] = list(self.grid)
            out["folds"] = self.folds
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "EstimatorSpec":
        known = {"method", "K", "lambda", "sigma2", "grid", "folds"}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown estimator keys: {sorted(unknown)}")
        if "method" not in d:
            raise ValueError("estimator spec requires a 'method'")
        kwargs = {"method": d["method"]}
        if "K" in d:
            kwargs["K"] = float(d["K"])
        if "lambda" in d:
            kwargs["lam"] = float(d["lambda"])
        if "sigma2" in d:
            kwargs["sigma2"] = float(d["sigma2"])
        if "grid" in d:
            kwargs["grid"] = tuple(float(x) for x in d["grid"])
        if "folds" in d:
            kwargs["folds"] = int(d["folds"])
        return cls(**kwargs)


_DEFAULT_ESTIMATORS = (EstimatorSpec("kf"), EstimatorSpec("rsci"))


@dataclass
class ExperimentConfig:
    """Dimensions, signal strength and selectors of one experiment cell."""

    m: int
    p: int
    n: int
    r_true: int
    rho: float
    b: float
    sigma: float = 1.0
    replicates: int = 100
    seed: int = 0
    estimators: tuple[EstimatorSpec, ...] = _DEFAULT_ESTIMATORS

    def __post_init__(self):
        if min(self.m, self.p, self.n) < 1:
            raise ValueError("dimensions must be positive")
        if not 1 <= self.r_true <= min(self.n, self.p):
            raise ValueError(
                f"r_true must lie in 1..{min(self.n, self.p)}, got {self.r_true}")
        if not 0 <= self.rho < 1:
            raise ValueError(f"rho must lie in [0, 1), got {self.rho}")
        if self.b < 0:
            raise ValueError(f"b must be nonnegative, got {self.b}")
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        self.estimators = tuple(self.estimators)
        labels = [s.label for s in self.estimators]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate estimator labels: {labels}")

    def to_dict(self) -> dict:
        return {"m": self.m, "p": self.p, "n": self.n, "r_true": self.r_true,
                "rho": self.rho, "b": self.b, "sigma": self.sigma,
                "replicates": self.replicates, "seed": self.seed,
                "estimators": [s.to_dict() for s in self.estimators]}

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {"m", "p", "n", "r_true", "rho", "b", "sigma", "replicates",
                 "seed", "estimators"}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        missing = {"m", "p", "n", "r_true", "rho", "b"} - set(d)
        if missing:
            raise ValueError(f"config keys missing: {sorted(missing)}")
        kwargs = {k: d[k] for k in known & set(d) if k != "estimators"}
        if "estimators" in d:
            kwargs["estimators"] = tuple(
                EstimatorSpec.from_dict(e) for e in d["estimators"])
        return cls(**kwargs)


@dataclass
class ReplicateRecord:
    replicate: int
    estimator: str
    r_hat: int
    ratio: float  # NaN when flagged
    flagged: bool = False


@dataclass
class EstimatorSummary:
    label: str
    available: bool
    reason: str | None
    n: int
    n_flagged: int
    mean_r_hat: float
    ratio_median: float
    ratio_q10: float
    ratio_q25: float
    ratio_q75: float
    ratio_q90: float

    def to_dict(self) -> dict:
        def num(x):
            return None if math.isnan(x) else float(x)

        return {"label": self.label, "available": self.available,
                "reason": self.reason, "n": self.n,
                "n_flagged": self.n_flagged, "mean_r_hat": num(self.mean_r_hat),
                "ratio_median": num(self.ratio_median),
                "ratio_q10": num(self.ratio_q10), "ratio_q25": num(self.ratio_q25),
                "ratio_q75": num(self.ratio_q75), "ratio_q90": num(self.ratio_q90)}


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    records: list[ReplicateRecord]
    summaries: dict[str, EstimatorSummary]

    def to_dict(self) -> dict:
        return {"config": self.config.to_dict(),
                "summaries": {k: v.to_dict() for k, v in self.summaries.items()},
                "n_records": len(self.records)}


def _evaluate(spec: EstimatorSpec, X, Y, path, cv_seed, config):
    if spec.method.endswith("-cv"):
        cv = cross_validate_k(X, Y, spec.method[:-3], k_grid=spec.grid,
                              folds=spec.folds, seed=cv_seed)
        return cv.report
    sigma2 = spec.sigma2
    if spec.method == "kf-known" and sigma2 is None:
        sigma2 = config.sigma**2
    return select_rank(path, method=spec.method, Y=Y, K=spec.K, lam=spec.lam,
                       sigma2=sigma2)


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Run all replicates of one experiment cell and aggregate per selector.

    Selectors that are infeasible at the configured dimensions (for
    example the plug-in variance when rank(X) = m) are marked
    unavailable rather than failing the run.
    """
    rep_seeds = np.random.SeedSequence(config.seed).spawn(config.replicates)

    def one(i: int):
        sx, sa, se, scv = rep_seeds[i].spawn(4)
        X = sample_design(config.m, config.p, config.rho, sx)
        A = sample_coefficients(config.p, config.n, config.r_true, config.b, sa)
        Y = sample_response(X, A, config.sigma, se)
        path = fit_path(X, Y)
        if config.r_true > path.rank_cap:
            raise ValueError(
                f"r_true={config.r_true} exceeds the attainable rank "
                f"{path.rank_cap} of this design")
        xa_true = X @ A
        xa_oracle = path.fitted(config.r_true)
        records, failures = [], {}
        for spec in config.estimators:
            try:
                report = _evaluate(spec, X, Y, path, scv, config)
            except InfeasibleError as exc:
                failures[spec.label] = str(exc)
                continue
            ratio = ratio_metric(path.fitted(report.r_hat), xa_oracle, xa_true)
            records.append(ReplicateRecord(
                replicate=i, estimator=spec.label, r_hat=int(report.r_hat),
                ratio=ratio, flagged=math.isnan(ratio)))
        return records, failures

    per_rep = map_indexed(one, config.replicates)
    records: list[ReplicateRecord] = []
    failures: dict[str, str] = {}
    for recs, fails in per_rep:
        records.extend(recs)
        failures.update(fails)

    summaries = {}
    for spec in config.estimators:
        recs = [r for r in records if r.estimator == spec.label]
        if not recs:
            summaries[spec.label] = EstimatorSummary(
                label=spec.label, available=False,
                reason=failures.get(spec.label), n=0, n_flagged=0,
                mean_r_hat=math.nan, ratio_median=math.nan,
                ratio_q10=math.nan, ratio_q25=math.nan,
                ratio_q75=math.nan, ratio_q90=math.nan)
            continue
        ratios = np.array([r.ratio for r in recs if not r.flagged])
        qs = (np.quantile(ratios, [0.5, 0.1, 0.25, 0.75, 0.9])
              if ratios.size else [math.nan] * 5)
        summaries[spec.label] = EstimatorSummary(
            label=spec.label, available=True, reason=None, n=len(recs),
            n_flagged=sum(r.flagged for r in recs),
            mean_r_hat=float(np.mean([r.r_hat for r in recs])),
            ratio_median=float(qs[0]), ratio_q10=float(qs[1]),
            ratio_q25=float(qs[2]), ratio_q75=float(qs[3]),
            ratio_q90=float(qs[4]))
    return ExperimentResult(config=config, records=records, summaries=summaries)
