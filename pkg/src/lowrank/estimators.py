"""Scikit-learn estimators wrapping the rank path and selection criteria.

``ReducedRankRegressor`` fits at a fixed coefficient rank;
``RankSelectingRegressor`` picks the rank by one of the penalized
criteria (optionally tuning K by cross-validation).  Both follow the
fit/predict/get_params protocol so they compose with pipelines and
model-selection tooling.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .regression import fit_path
from .selection import (DEFAULT_ALPHA, DEFAULT_CV_FOLDS, DEFAULT_CV_GRID,
                        DEFAULT_K, cross_validate_k, select_rank)

__all__ = ["ReducedRankRegressor", "RankSelectingRegressor"]


def _validate_pair(X, Y):
    X = check_array(X, dtype=np.float64)
    Y = check_array(Y, dtype=np.float64, ensure_2d=False)
    if Y.ndim == 1:
        Y = Y[:, None]
    if X.shape[0] != Y.shape[0]:
        raise ValueError(
            f"X and Y must have the same number of rows, "
            f"got {X.shape[0]} and {Y.shape[0]}")
    return X, Y


class ReducedRankRegressor(RegressorMixin, BaseEstimator):
    """Least-squares multivariate regression at a fixed coefficient rank.

    Parameters
    ----------
    rank : int
        Rank constraint on the coefficient matrix (0 gives the zero fit).
    """

    def __init__(self, rank: int = 1):
        self.rank = rank

    def fit(self, X, Y):
        X, Y = _validate_pair(X, Y)
        path = fit_path(X, Y)
        if not 0 <= self.rank <= path.rank_cap:
            raise ValueError(
                f"rank must lie in 0..{path.rank_cap} for this data, "
                f"got {self.rank}")
        self.path_ = path
        self.coef_ = path.coefficients(self.rank)
        self.rank_ = int(self.rank)
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=np.float64)
        return X @ self.coef_


class RankSelectingRegressor(RegressorMixin, BaseEstimator):
    """Multivariate regression with data-driven rank selection.

    Parameters
    ----------
    method : str
        "kf" (multiplicative unknown-variance criterion), "kf-known"
        (requires ``sigma2``), "rsc" (requires ``lam``), "rsci"
        (plug-in variance), or "kf-cv" / "rsci-cv" to tune K by V-fold
        cross-validation over ``cv_grid``.
    K : float
        Penalty multiplier for kf/kf-known/rsci (default 2, twice the
        minimal level).
    lam : float or None
        Linear penalty weight for "rsc".
    sigma2 : float or None
        Known noise variance for "kf-known".
    r_max : int or None
        Largest candidate rank; defaults to the feasibility cap for
        "kf" and to min(rank(X), n_outputs) otherwise.
    alpha : float
        Safety factor in the default r_max for "kf".
    table_policy, nsim, table_seed, eps :
        How the Ky-Fan norm tables are evaluated (see
        :func:`lowrank.kyfan.kyfan_table`).
    cv_grid, cv_folds, cv_seed :
        Cross-validation controls for the "-cv" methods.
    """

    def __init__(self, method: str = "kf", K: float = DEFAULT_K,
                 lam: float | None = None, sigma2: float | None = None,
                 r_max: int | None = None, alpha: float = DEFAULT_ALPHA,
                 table_policy: str = "auto", nsim: int = 200,
                 table_seed: int = 0, eps: float = 1e-9,
                 cv_grid=DEFAULT_CV_GRID, cv_folds: int = DEFAULT_CV_FOLDS,
                 cv_seed: int | None = 0,
                 allow_minimal_violation: bool = False):
        self.method = method
        self.K = K
        self.lam = lam
        self.sigma2 = sigma2
        self.r_max = r_max
        self.alpha = alpha
        self.table_policy = table_policy
        self.nsim = nsim
        self.table_seed = table_seed
        self.eps = eps
        self.cv_grid = cv_grid
        self.cv_folds = cv_folds
        self.cv_seed = cv_seed
        self.allow_minimal_violation = allow_minimal_violation

    def fit(self, X, Y):
        X, Y = _validate_pair(X, Y)
        if self.method in ("kf-cv", "rsci-cv"):
            base = self.method[:-3]
            cv = cross_validate_k(X, Y, base, k_grid=self.cv_grid,
                                  folds=self.cv_folds, seed=self.cv_seed,
                                  alpha=self.alpha,
                                  table_policy=self.table_policy,
                                  nsim=self.nsim, table_seed=self.table_seed,
                                  eps=self.eps)
            self.K_ = cv.K
            self.cv_result_ = cv
            self.report_ = cv.report
            path = fit_path(X, Y)
        else:
            path = fit_path(X, Y)
            self.report_ = select_rank(
                path, method=self.method, Y=Y, K=self.K, lam=self.lam,
                sigma2=self.sigma2, r_max=self.r_max, alpha=self.alpha,
                table_policy=self.table_policy, nsim=self.nsim,
                table_seed=self.table_seed, eps=self.eps,
                allow_minimal_violation=self.allow_minimal_violation)
            self.K_ = self.report_.K
        self.path_ = path
        self.rank_ = int(self.report_.r_hat)
        self.coef_ = path.coefficients(self.rank_)
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=np.float64)
        return X @ self.coef_
