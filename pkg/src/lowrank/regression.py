"""Projection onto the design column space and the rank-constrained
least-squares path.

All rank-r fits share one SVD of the projected response PY: the fitted
values at rank r are the top-r truncation of PY, the coefficient matrix
is recovered through the design pseudo-inverse, and the residual sums of
squares follow from the Pythagorean split

    ||Y - fitted(r)||^2 = ||Y - PY||^2 + sum of squared singular values
                                         of PY beyond the first r.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["Projector", "FitPath", "projector", "fit_path"]


@dataclass(frozen=True)
class Projector:
    """Orthogonal projector onto the column space of a design matrix.

    ``q`` is the numerical rank of the design; ``tol`` the singular-value
    threshold that produced it.
    """

    matrix: np.ndarray
    q: int
    tol: float


def _as_matrix(a, name: str) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise ValueError(f"{name} must be a 2-D matrix, got ndim={a.ndim}")
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"{name} must have positive dimensions, got {a.shape}")
    return a


def _rank_tol(s: np.ndarray, shape: tuple[int, int], tol: float | None) -> float:
    if tol is not None:
        return float(tol)
    if s.size == 0 or s[0] == 0.0:
        return 0.0
    return max(shape) * s[0] * np.finfo(float).eps


def projector(X, tol: float | None = None) -> Projector:
    """Orthogonal projector P onto range(X), with numerical rank.

    The default threshold is max(m, p) * sigma_1(X) * machine epsilon.
    An all-zero design yields q = 0 and P = 0.
    """
    X = _as_matrix(X, "X")
    u, s, _ = np.linalg.svd(X, full_matrices=False)
    t = _rank_tol(s, X.shape, tol)
    q = int(np.count_nonzero(s > t))
    uq = u[:, :q]
    return Projector(matrix=uq @ uq.T, q=q, tol=t)


class FitPath:
    """Shared SVD of the projected response and per-rank extraction.

    Attributes
    ----------
    projector : Projector for the design.
    q : numerical rank of the design.
    q_eff : numerical rank of PY.
    rank_cap : largest admissible rank, min(q, n); beyond ``q_eff`` the
        truncation is saturated, so fits and RSS are constant there.
    rss : array with rss[r] for r = 0..rank_cap.
    rss_base : ||Y - PY||^2, the off-range residual.
    """

    def __init__(self, X, Y, tol: float | None = None):
        X = _as_matrix(X, "X")
        Y = _as_matrix(Y, "Y")
        if X.shape[0] != Y.shape[0]:
            raise ValueError(
                f"X and Y must have the same number of rows, "
                f"got {X.shape[0]} and {Y.shape[0]}")
        m, p = X.shape
        n = Y.shape[1]

        ux, sx, vxt = np.linalg.svd(X, full_matrices=False)
        tx = _rank_tol(sx, X.shape, tol)
        q = int(np.count_nonzero(sx > tx))
        uq = ux[:, :q]
        self.projector = Projector(matrix=uq @ uq.T, q=q, tol=tx)
        # (X^T X)^+ X^T from the SVD of X; stable for p > m and rank-deficient X
        self._extractor = vxt[:q].T @ (uq / sx[:q]).T

        py = uq @ (uq.T @ Y)
        self._u, self._s, self._vt = np.linalg.svd(py, full_matrices=False)
        tpy = _rank_tol(self._s, py.shape, tol)
        self.q_eff = int(np.count_nonzero(self._s > tpy))
        self.rank_cap = min(q, n)

        self.rss_base = float(np.sum((Y - py) ** 2))
        sq = self._s**2
        tail = np.concatenate(([sq.sum()], sq.sum() - np.cumsum(sq)))
        self.rss = self.rss_base + tail[: self.rank_cap + 1]
        self.m, self.p, self.n, self.q = m, p, n, q

    def _check_rank(self, r: int) -> int:
        r = int(r)
        if not 0 <= r <= self.rank_cap:
            raise ValueError(f"rank must lie in 0..{self.rank_cap}, got {r}")
        return r

    def fitted(self, r: int) -> np.ndarray:
        """Top-r truncation of PY (the rank-r fitted values)."""
        r = self._check_rank(r)
        k = min(r, len(self._s))
        return (self._u[:, :k] * self._s[:k]) @ self._vt[:k]

    def coefficients(self, r: int) -> np.ndarray:
        """Coefficient matrix of the rank-r fit (p-by-n, rank at most r)."""
        r = self._check_rank(r)
        if r == 0:
            return np.zeros((self.p, self.n))
        return self._extractor @ self.fitted(r)

    def rss_at(self, r: int) -> float:
        """Residual sum of squares of the rank-r fit."""
        return float(self.rss[self._check_rank(r)])

    def singular_values(self) -> np.ndarray:
        """Singular values of PY, descending."""
        return self._s.copy()


def fit_path(X, Y, tol: float | None = None) -> FitPath:
    """Compute the full rank path from one SVD of the projected response."""
    return FitPath(X, Y, tol=tol)
