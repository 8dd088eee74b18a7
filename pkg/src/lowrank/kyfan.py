"""Expected Ky-Fan (2,r) norms of Gaussian random matrices.

Every rank penalty in this package is built from the expected Ky-Fan
(2,r) norm of a q-by-n matrix with i.i.d. standard normal entries, i.e.
the expected root of the sum of the r largest squared singular values.
Two evaluation routes are provided:

* Monte Carlo over replicated SVDs (exact in the limit, cheap for small
  matrices),
* partial second moments of the Marchenko-Pastur distribution, accurate
  once n*q is larger than about 1000.

An analytic lower/upper envelope on the squared scale is available for
validation of either route.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate

from ._threads import map_indexed
from .errors import NumericalError

__all__ = [
    "KyFanTable",
    "kyfan_monte_carlo",
    "kyfan_marchenko_pastur",
    "kyfan_envelope",
    "kyfan_table",
    "mp_support",
    "mp_density",
    "mp_quantile",
    "MP_AUTO_THRESHOLD",
]

# Above this value of n*q the auto policy switches to the Marchenko-Pastur
# route; below it direct Monte Carlo is both fast and more accurate.
MP_AUTO_THRESHOLD = 1000

_QUAD_OPTS = {"epsabs": 1e-9, "epsrel": 1e-9, "limit": 200}


@dataclass(frozen=True)
class KyFanTable:
    """Expected Ky-Fan (2,r) norms for r = 1..min(q, n).

    ``values[r-1]`` is the expected norm at rank r (root scale).  For
    Monte Carlo tables ``se_sq[r-1]`` holds the standard error of the
    replicate mean of the squared norms, used as the tolerance unit in
    envelope checks.
    """

    q: int
    n: int
    values: np.ndarray
    method: str  # "monte-carlo" | "marchenko-pastur"
    nsim: int | None = None
    seed: int | None = None
    se_sq: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.values)

    @property
    def squared(self) -> np.ndarray:
        return self.values**2

    def squared_at(self, r: int) -> float:
        """Squared expected norm at rank r (r = 0 gives 0)."""
        if r == 0:
            return 0.0
        if not 1 <= r <= len(self.values):
            raise ValueError(f"rank {r} outside table range 1..{len(self.values)}")
        return float(self.values[r - 1] ** 2)


def _check_dims(q: int, n: int) -> None:
    if q < 1 or n < 1:
        raise ValueError(f"matrix dimensions must be positive, got q={q}, n={n}")


def kyfan_monte_carlo(q: int, n: int, nsim: int = 200, seed: int = 0) -> KyFanTable:
    """Monte Carlo estimate of the expected Ky-Fan norms.

    Each replicate draws a q-by-n standard normal matrix from its own
    PCG64 stream (spawned from ``seed`` by replicate index, so results do
    not depend on evaluation order), computes the root of the cumulative
    squared singular values, and the estimate is the mean of those roots.
    """
    _check_dims(q, n)
    if nsim < 1:
        raise ValueError("nsim must be >= 1")
    streams = np.random.SeedSequence(seed).spawn(nsim)

    def one(i: int) -> np.ndarray:
        g = np.random.default_rng(streams[i]).standard_normal((q, n))
        s = np.linalg.svd(g, compute_uv=False)
        return np.sqrt(np.cumsum(s * s))

    rows = np.vstack(map_indexed(one, nsim))
    values = rows.mean(axis=0)
    se_sq = None
    if nsim > 1:
        se_sq = (rows**2).std(axis=0, ddof=1) / math.sqrt(nsim)
    return KyFanTable(q=q, n=n, values=values, method="monte-carlo",
                      nsim=nsim, seed=seed, se_sq=se_sq)


def mp_support(beta: float) -> tuple[float, float]:
    """Support endpoints ((1-sqrt(beta))^2, (1+sqrt(beta))^2)."""
    if not 0.0 < beta <= 1.0:
        raise ValueError(f"beta must lie in (0, 1], got {beta}")
    rb = math.sqrt(beta)
    return (1.0 - rb) ** 2, (1.0 + rb) ** 2


def mp_density(x, beta: float):
    """Marchenko-Pastur density with aspect ratio ``beta``.

    Zero off the open support interval, including at the endpoints.
    Accepts scalars or arrays.
    """
    lo, hi = mp_support(beta)
    x = np.asarray(x, dtype=float)
    inside = (x > lo) & (x < hi)
    out = np.zeros_like(x)
    xs = x[inside]
    out[inside] = np.sqrt((xs - lo) * (hi - xs)) / (2.0 * math.pi * beta * xs)
    if out.ndim == 0:
        return float(out)
    return out


def mp_quantile(alpha: float, beta: float, eps: float = 1e-9,
                max_iter: int = 200) -> float:
    """Point x with upper-tail mass alpha under the MP density.

    Bisection on the support until the bracket is narrower than ``eps``;
    the tail mass at each midpoint is evaluated by adaptive quadrature.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    if eps <= 0:
        raise ValueError("eps must be positive")
    lo, hi = mp_support(beta)
    # degenerate tail masses pin the quantile to a support edge exactly
    if alpha == 0.0:
        return hi
    if alpha == 1.0:
        return lo

    def dens(x: float) -> float:
        return math.sqrt((x - lo) * (hi - x)) / (2.0 * math.pi * beta * x)

    m, M = lo, hi
    it = 0
    while (M - m) > eps:
        it += 1
        if it > max_iter:
            raise NumericalError(
                f"quantile bisection did not converge below eps={eps} "
                f"after {max_iter} iterations")
        mid = 0.5 * (m + M)
        tail = integrate.quad(dens, mid, hi, **_QUAD_OPTS)[0]
        if tail < alpha:
            M = mid
        else:
            m = mid
    return 0.5 * (m + M)


def _mp_partial_moment(x_lo: float, beta: float) -> float:
    """Integral of x * density from x_lo to the upper support edge."""
    lo, hi = mp_support(beta)

    def xdens(x: float) -> float:
        return math.sqrt((x - lo) * (hi - x)) / (2.0 * math.pi * beta)

    return integrate.quad(xdens, x_lo, hi, **_QUAD_OPTS)[0]


def kyfan_marchenko_pastur(q: int, n: int, eps: float = 1e-9) -> KyFanTable:
    """Marchenko-Pastur approximation of the expected Ky-Fan norms.

    For each rank r the squared value is n*q times the partial second
    moment of the MP distribution above the quantile with upper-tail
    mass r/min(q, n).  Symmetric in (q, n) by construction.
    """
    _check_dims(q, n)
    k = min(q, n)
    beta = k / max(q, n)
    values = np.empty(k)
    for r in range(1, k + 1):
        x_alpha = mp_quantile(r / k, beta, eps=eps)
        values[r - 1] = math.sqrt(_mp_partial_moment(x_alpha, beta) * n * q)
    return KyFanTable(q=q, n=n, values=values, method="marchenko-pastur")


def kyfan_envelope(q: int, n: int, r: int) -> tuple[float, float]:
    """Analytic (lower, upper) bounds on the squared expected norm at rank r."""
    _check_dims(q, n)
    if q > n:
        q, n = n, q
    if not 1 <= r <= q:
        raise ValueError(f"rank must lie in 1..{q}, got {r}")
    lower = r * (n - 1.0 / q)
    sq_n, sq_q = math.sqrt(n), math.sqrt(q)
    first = r * (sq_n + sq_q) ** 2
    second = n * q - sum((sq_n - math.sqrt(k)) ** 2 for k in range(r + 1, q + 1))
    third = r + sum((sq_n + math.sqrt(q - k + 1)) ** 2 for k in range(1, r + 1))
    return lower, min(first, second, third)


@lru_cache(maxsize=None)
def _cached_table(q: int, n: int, method: str, nsim: int, seed: int,
                  eps: float) -> KyFanTable:
    if method == "monte-carlo":
        return kyfan_monte_carlo(q, n, nsim=nsim, seed=seed)
    return kyfan_marchenko_pastur(q, n, eps=eps)


def kyfan_table(q: int, n: int, policy: str = "auto", nsim: int = 200,
                seed: int = 0, eps: float = 1e-9) -> KyFanTable:
    """Cached table with policy dispatch.

    ``auto`` selects Marchenko-Pastur when n*q exceeds
    ``MP_AUTO_THRESHOLD`` and Monte Carlo otherwise.  Repeated calls with
    the same inputs return the identical cached table.
    """
    _check_dims(q, n)
    aliases = {"auto": "auto", "mc": "monte-carlo", "monte-carlo": "monte-carlo",
               "mp": "marchenko-pastur", "marchenko-pastur": "marchenko-pastur"}
    if policy not in aliases:
        raise ValueError(f"unknown table policy {policy!r}")
    method = aliases[policy]
    if method == "auto":
        method = "marchenko-pastur" if n * q > MP_AUTO_THRESHOLD else "monte-carlo"
    if method == "monte-carlo":
        return _cached_table(q, n, method, nsim, seed, 0.0)
    return _cached_table(q, n, method, 0, 0, eps)
