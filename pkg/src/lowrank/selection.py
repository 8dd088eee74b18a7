"""Rank-selection criteria over a reduced-rank fit path.

Two penalty families are implemented on top of the expected Ky-Fan norm
tables:

* known noise variance: criterion rss(r) + K * S(r)^2 * sigma^2,
* unknown noise variance: the multiplicative criterion
  rss(r) * (1 + pen(r) / (n*m)) with
  pen(r) = K * S(r)^2 / (1 - (1 + K * S(r)^2) / (n*m)),
  equivalently log(rss) plus a log-scale penalty.

K = 1 is the minimal level: selecting with K below 1 provably overfits,
so sub-unit K is only accepted behind an explicit flag (used by the
overfitting diagnostics).  The linear-penalty RSC criterion of Bunea,
She and Wegkamp and its plug-in variant RSCI (lambda = K * sigma_hat^2)
are included for comparison, plus V-fold cross-validation of K and
selection among arbitrary externally-fitted candidates.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibleError, VarianceNotEstimableError
from .kyfan import KyFanTable, kyfan_table
from .regression import FitPath, Projector, fit_path

__all__ = [
    "PenaltyTable",
    "SelectionReport",
    "CvResult",
    "penalty_known_variance",
    "penalty_unknown_variance",
    "penalty_log",
    "max_selectable_rank",
    "select_rank_known_variance",
    "select_rank_unknown_variance",
    "select_rank_rsc",
    "estimate_noise_variance",
    "select_rank",
    "fold_blocks",
    "cross_validate_k",
    "select_among",
    "DEFAULT_K",
    "DEFAULT_ALPHA",
    "DEFAULT_CV_GRID",
    "DEFAULT_CV_FOLDS",
]

DEFAULT_K = 2.0  # twice the minimal penalty level
DEFAULT_ALPHA = 0.9
DEFAULT_CV_GRID = tuple(round(1.2 + 0.2 * i, 1) for i in range(10))  # 1.2 .. 3.0
DEFAULT_CV_FOLDS = 10

_MINIMAL_PENALTY_MSG = (
    "K <= 1 is at or below the minimal penalty level and provably overfits; "
    "pass allow_minimal_violation=True to evaluate it anyway")


@dataclass(frozen=True)
class PenaltyTable:
    """Per-rank penalty values, ``values[r]`` for r = 0..r_max.

    ``kind`` is one of "known-variance", "unknown-variance",
    "unknown-variance-log" or "rsc-linear".  ``values[0]`` is always 0.
    """

    kind: str
    values: np.ndarray
    q: int
    n: int
    m: int | None = None
    K: float | None = None
    lam: float | None = None

    @property
    def r_max(self) -> int:
        return len(self.values) - 1


@dataclass
class SelectionReport:
    """Outcome of a rank-selection criterion over a candidate set.

    ``candidates``, ``rss``, ``penalty`` and ``criterion`` are aligned
    arrays; ``r_hat`` attains the minimal criterion value, ties broken
    toward the smallest rank.
    """

    method: str
    r_hat: int
    candidates: np.ndarray
    rss: np.ndarray
    penalty: np.ndarray
    criterion: np.ndarray
    r_max: int
    K: float | None = None
    lam: float | None = None
    sigma2: float | None = None


@dataclass
class CvResult:
    """Cross-validation outcome: chosen K, final report, per-K CV errors."""

    K: float
    report: SelectionReport
    cv_errors: dict[float, float]
    skipped: dict[float, str] = field(default_factory=dict)
    grid: tuple[float, ...] = ()
    folds: int = 0
    seed: int | None = None


def _check_k_positive(K: float) -> float:
    K = float(K)
    if not math.isfinite(K) or K <= 0:
        raise ValueError(f"K must be a positive number, got {K}")
    return K


def penalty_known_variance(table: KyFanTable, K: float,
                           allow_minimal_violation: bool = False) -> PenaltyTable:
    """Penalty K * S(r)^2 for the known-variance criterion (K > 1)."""
    K = _check_k_positive(K)
    if K <= 1.0 and not allow_minimal_violation:
        raise ValueError(_MINIMAL_PENALTY_MSG)
    values = np.concatenate(([0.0], K * table.squared))
    return PenaltyTable(kind="known-variance", values=values,
                        q=table.q, n=table.n, K=K)


def _check_r_max(table: KyFanTable, r_max: int) -> int:
    r_max = int(r_max)
    if not 1 <= r_max <= len(table):
        raise ValueError(f"r_max must lie in 1..{len(table)}, got {r_max}")
    return r_max


def penalty_unknown_variance(table: KyFanTable, K: float, m: int, r_max: int,
                             allow_minimal_violation: bool = False) -> PenaltyTable:
    """Multiplicative-criterion penalty for ranks 1..r_max.

    Requires K * S(r_max)^2 + 1 < n*m (the penalty blows up as the
    residual degrees of freedom vanish).  With K <= 1 (flagged only) the
    sub-minimal diagnostic variant K*S^2 / (1 - K*S^2/(n*m)) is built
    instead; this is the form whose overfitting the diagnostics
    demonstrate.
    """
    K = _check_k_positive(K)
    r_max = _check_r_max(table, r_max)
    if m < 1:
        raise ValueError(f"m must be positive, got {m}")
    nm = table.n * m
    s2 = table.squared[:r_max]
    if K > 1.0:
        load = K * s2 + 1.0
        bad = np.nonzero(load >= nm)[0]
        if bad.size:
            r = int(bad[0]) + 1
            raise InfeasibleError(
                f"multiplicative penalty infeasible at rank r={r}: "
                f"K*S(r)^2 + 1 = {load[bad[0]]:.6g} >= n*m = {nm}")
        pen = K * s2 / (1.0 - load / nm)
    else:
        if not allow_minimal_violation:
            raise ValueError(_MINIMAL_PENALTY_MSG)
        denom = 1.0 - K * s2 / nm
        bad = np.nonzero(denom <= 0)[0]
        if bad.size:
            r = int(bad[0]) + 1
            raise InfeasibleError(
                f"sub-minimal penalty infeasible at rank r={r}: "
                f"K*S(r)^2 = {K * s2[bad[0]]:.6g} >= n*m = {nm}")
        pen = K * s2 / denom
    values = np.concatenate(([0.0], pen))
    return PenaltyTable(kind="unknown-variance", values=values,
                        q=table.q, n=table.n, m=int(m), K=K)


def penalty_log(table: KyFanTable, K: float, m: int, r_max: int) -> PenaltyTable:
    """Log-scale penalty -log(1 - K * S(r)^2 / (n*m - 1)) for ranks 1..r_max.

    Satisfies pen_mult(r) = n*m * (exp(pen_log(r)) - 1) wherever both
    are defined.
    """
    K = _check_k_positive(K)
    if K <= 1.0:
        raise ValueError(_MINIMAL_PENALTY_MSG)
    r_max = _check_r_max(table, r_max)
    if m < 1:
        raise ValueError(f"m must be positive, got {m}")
    nm = table.n * m
    u = K * table.squared[:r_max] / (nm - 1.0)
    bad = np.nonzero(u >= 1.0)[0]
    if bad.size:
        r = int(bad[0]) + 1
        raise InfeasibleError(
            f"log penalty infeasible at rank r={r}: "
            f"K*S(r)^2 = {K * table.squared[bad[0]]:.6g} >= n*m - 1 = {nm - 1}")
    values = np.concatenate(([0.0], -np.log1p(-u)))
    return PenaltyTable(kind="unknown-variance-log", values=values,
                        q=table.q, n=table.n, m=int(m), K=K)


def max_selectable_rank(q: int, n: int, m: int, K: float,
                        alpha: float = DEFAULT_ALPHA) -> int:
    """Largest rank the multiplicative criterion may search over.

    min(min(q, n), floor(alpha * (n*m - 1) / (K * (sqrt(q) + sqrt(n))^2)))
    for 0 < alpha < 1; raises when the result is below 1.
    """
    K = _check_k_positive(K)
    if K <= 1.0:
        raise ValueError("K must exceed 1")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if min(q, n, m) < 1:
        raise ValueError("dimensions must be positive")
    cap = math.floor(alpha * (n * m - 1) / (K * (math.sqrt(q) + math.sqrt(n)) ** 2))
    r_max = min(min(q, n), cap)
    if r_max < 1:
        raise InfeasibleError("penalty regime infeasible at these dimensions")
    return r_max


def _resolve_candidates(rss: np.ndarray, candidates, default) -> np.ndarray:
    rss = np.asarray(rss, dtype=float)
    if candidates is None:
        cand = np.asarray(default, dtype=int)
    else:
        cand = np.unique(np.asarray(list(candidates), dtype=int))
    if cand.size == 0:
        raise ValueError("candidate set is empty")
    if cand[0] < 0 or cand[-1] >= rss.size:
        raise ValueError(
            f"candidate ranks must lie in 0..{rss.size - 1}, "
            f"got range {cand[0]}..{cand[-1]}")
    return cand


def _pick(candidates: np.ndarray, criterion: np.ndarray) -> int:
    # candidates ascending, so the first argmin is the smallest rank
    return int(candidates[int(np.argmin(criterion))])


def select_rank_known_variance(rss, penalty: PenaltyTable, sigma2: float,
                               candidates=None) -> SelectionReport:
    """Minimize rss(r) + pen(r) * sigma2 over the candidate ranks."""
    if not sigma2 > 0:
        raise ValueError(f"sigma2 must be positive, got {sigma2}")
    cand = _resolve_candidates(rss, candidates, range(penalty.r_max + 1))
    if cand[-1] > penalty.r_max:
        raise ValueError(f"candidate rank {cand[-1]} exceeds penalty "
                         f"range 0..{penalty.r_max}")
    rss = np.asarray(rss, dtype=float)
    pen = penalty.values[cand]
    crit = rss[cand] + pen * sigma2
    return SelectionReport(method="kf-known", r_hat=_pick(cand, crit),
                           candidates=cand, rss=rss[cand], penalty=pen,
                           criterion=crit, r_max=int(cand[-1]),
                           K=penalty.K, sigma2=float(sigma2))


def select_rank_unknown_variance(rss, penalty: PenaltyTable,
                                 candidates=None) -> SelectionReport:
    """Minimize rss(r) * (1 + pen(r) / (n*m)) over the candidate ranks.

    The multiplicative form is used throughout (never log of rss), so
    rss = 0 is handled without singularities; ties go to the smallest
    rank.
    """
    if penalty.m is None:
        raise ValueError("penalty table lacks the sample-size dimension m")
    cand = _resolve_candidates(rss, candidates, range(1, penalty.r_max + 1))
    if cand[-1] > penalty.r_max:
        raise ValueError(f"candidate rank {cand[-1]} exceeds penalty "
                         f"range 0..{penalty.r_max}")
    rss = np.asarray(rss, dtype=float)
    nm = penalty.n * penalty.m
    pen = penalty.values[cand]
    crit = rss[cand] * (1.0 + pen / nm)
    return SelectionReport(method="kf", r_hat=_pick(cand, crit),
                           candidates=cand, rss=rss[cand], penalty=pen,
                           criterion=crit, r_max=int(cand[-1]), K=penalty.K)


def select_rank_rsc(rss, lam: float, n: int, rank_x: int,
                    candidates=None) -> SelectionReport:
    """Linear-penalty criterion rss(r) + lam * (n + rank_x) * r."""
    lam = float(lam)
    if lam < 0:
        raise ValueError(f"lambda must be nonnegative, got {lam}")
    rss = np.asarray(rss, dtype=float)
    cand = _resolve_candidates(rss, candidates, range(rss.size))
    pen = lam * (n + rank_x) * cand.astype(float)
    crit = rss[cand] + pen
    return SelectionReport(method="rsc", r_hat=_pick(cand, crit),
                           candidates=cand, rss=rss[cand], penalty=pen,
                           criterion=crit, r_max=int(cand[-1]), lam=lam)


def estimate_noise_variance(Y, proj: Projector) -> float:
    """Unbiased noise-variance estimate from the off-range residual.

    sigma2_hat = ||Y - PY||^2 / (m*n - q*n); requires rank(X) < m.
    """
    Y = np.asarray(Y, dtype=float)
    m, n = Y.shape
    if proj.q >= m:
        raise VarianceNotEstimableError(
            "variance not estimable: design has full row rank")
    resid = Y - proj.matrix @ Y
    return float(np.sum(resid**2) / (m * n - proj.q * n))


def select_rank(path: FitPath, method: str = "kf", Y=None, K: float = DEFAULT_K,
                lam: float | None = None, sigma2: float | None = None,
                r_max: int | None = None, alpha: float = DEFAULT_ALPHA,
                table_policy: str = "auto", nsim: int = 200,
                table_seed: int = 0, eps: float = 1e-9,
                allow_minimal_violation: bool = False) -> SelectionReport:
    """Run one of the selection criteria over a fitted rank path.

    ``method`` is one of:

    * ``kf`` -- multiplicative unknown-variance criterion; candidate set
      {1..r_max} with r_max defaulting to :func:`max_selectable_rank`,
    * ``kf-known`` -- known-variance criterion (requires ``sigma2``);
      candidate set {0..r_max}, r_max defaulting to min(q, n),
    * ``rsc`` -- linear penalty with explicit ``lam``; {0..r_max},
    * ``rsci`` -- linear penalty with lam = K * sigma2_hat (requires
      ``Y`` and rank(X) < m); {0..r_max}.
    """
    n = path.n
    if method == "kf":
        table = kyfan_table(path.q, n, table_policy, nsim, table_seed, eps)
        if r_max is None:
            r_max = max_selectable_rank(path.q, n, path.m, K, alpha)
        pen = penalty_unknown_variance(
            table, K, path.m, r_max,
            allow_minimal_violation=allow_minimal_violation)
        return select_rank_unknown_variance(path.rss, pen)
    if method == "kf-known":
        if sigma2 is None:
            raise ValueError("method 'kf-known' requires sigma2")
        table = kyfan_table(path.q, n, table_policy, nsim, table_seed, eps)
        pen = penalty_known_variance(
            table, K, allow_minimal_violation=allow_minimal_violation)
        if r_max is None:
            r_max = path.rank_cap
        return select_rank_known_variance(path.rss, pen, sigma2,
                                          candidates=range(int(r_max) + 1))
    if method == "rsc":
        if lam is None:
            raise ValueError("method 'rsc' requires lam")
        if r_max is None:
            r_max = path.rank_cap
        return select_rank_rsc(path.rss, lam, n, path.q,
                               candidates=range(int(r_max) + 1))
    if method == "rsci":
        if Y is None:
            raise ValueError("method 'rsci' requires the response matrix Y")
        sigma2_hat = estimate_noise_variance(Y, path.projector)
        if r_max is None:
            r_max = path.rank_cap
        report = select_rank_rsc(path.rss, K * sigma2_hat, n, path.q,
                                 candidates=range(int(r_max) + 1))
        report.method = "rsci"
        report.K = float(K)
        report.sigma2 = sigma2_hat
        return report
    raise ValueError(f"unknown selection method {method!r}")


def fold_blocks(m: int, folds: int, seed) -> list[np.ndarray]:
    """Partition row indices 0..m-1 into ``folds`` blocks by seeded shuffle.

    Every row lands in exactly one block; each block leaves at least one
    training row behind.
    """
    if folds < 2:
        raise ValueError(f"folds must be >= 2, got {folds}")
    perm = np.random.default_rng(seed).permutation(m)
    blocks = np.array_split(perm, folds)
    if any(b.size == 0 for b in blocks) or any(m - b.size < 1 for b in blocks):
        raise ValueError(f"cannot split {m} rows into {folds} non-trivial folds")
    return blocks


def cross_validate_k(X, Y, method: str, k_grid=DEFAULT_CV_GRID,
                     folds: int = DEFAULT_CV_FOLDS, seed: int | None = 0,
                     alpha: float = DEFAULT_ALPHA, table_policy: str = "auto",
                     nsim: int = 200, table_seed: int = 0,
                     eps: float = 1e-9) -> CvResult:
    """Tune K for the ``kf`` or ``rsci`` criterion by V-fold CV.

    Rows are partitioned into ``folds`` blocks by a seeded shuffle.  For
    each K the path is refitted on the training rows of every fold, the
    held-out rows are predicted with the selected-rank coefficients, and
    the squared prediction error is accumulated.  K values infeasible at
    the training dimensions are skipped with a warning (an error is
    raised if none survive).  The winner (ties toward smaller K) is
    refitted on the full data.
    """
    if method not in ("kf", "rsci"):
        raise ValueError(f"cross-validation supports 'kf' and 'rsci', got {method!r}")
    grid = tuple(float(k) for k in k_grid)
    if not grid:
        raise ValueError("k_grid must not be empty")
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    m = X.shape[0]
    blocks = fold_blocks(m, folds, seed)

    fold_data = []
    for block in blocks:
        mask = np.ones(m, dtype=bool)
        mask[block] = False
        path = fit_path(X[mask], Y[mask])
        fold_data.append((path, X[block], Y[block], Y[mask]))

    cv_errors: dict[float, float] = {}
    skipped: dict[float, str] = {}
    for K in grid:
        err = 0.0
        try:
            for path, x_te, y_te, y_tr in fold_data:
                report = select_rank(path, method=method, Y=y_tr, K=K,
                                     alpha=alpha, table_policy=table_policy,
                                     nsim=nsim, table_seed=table_seed, eps=eps)
                pred = x_te @ path.coefficients(report.r_hat)
                err += float(np.sum((y_te - pred) ** 2))
        except InfeasibleError as exc:
            skipped[K] = str(exc)
            warnings.warn(f"K={K} skipped in cross-validation: {exc}")
            continue
        cv_errors[K] = err
    if not cv_errors:
        raise InfeasibleError(
            "every K in the grid is infeasible at the training dimensions")

    best = min(sorted(cv_errors), key=lambda k: (cv_errors[k], k))
    final_path = fit_path(X, Y)
    report = select_rank(final_path, method=method, Y=Y, K=best, alpha=alpha,
                         table_policy=table_policy, nsim=nsim,
                         table_seed=table_seed, eps=eps)
    return CvResult(K=best, report=report, cv_errors=cv_errors,
                    skipped=skipped, grid=grid, folds=folds, seed=seed)


def _numerical_rank(a: np.ndarray) -> int:
    s = np.linalg.svd(np.asarray(a, dtype=float), compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    tol = max(a.shape) * s[0] * np.finfo(float).eps
    return int(np.count_nonzero(s > tol))


def select_among(candidates, penalty: PenaltyTable) -> int:
    """Pick among arbitrary fitted candidates by the multiplicative criterion.

    ``candidates`` is a sequence of (coefficients, fitted values, rss)
    triples; each is penalized at the numerical rank of its coefficient
    matrix.  Returns the index of the winner, ties toward the smallest
    index.
    """
    if penalty.m is None:
        raise ValueError("penalty table lacks the sample-size dimension m")
    if not candidates:
        raise ValueError("candidate list is empty")
    nm = penalty.n * penalty.m
    crit = np.empty(len(candidates))
    for i, (coef, _fitted, rss) in enumerate(candidates):
        rank = _numerical_rank(np.asarray(coef))
        if rank > penalty.r_max:
            raise ValueError(
                f"candidate {i} has rank {rank}, beyond the penalty "
                f"range 0..{penalty.r_max}")
        crit[i] = float(rss) * (1.0 + penalty.values[rank] / nm)
    return int(np.argmin(crit))
