"""Two-sided Mann-Whitney-Wilcoxon test, Pearson correlation and normalised OLS."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .distributions import f_sf, normal_sf, t_two_sided

EXACT_MAX_N = 16
MAX_CONDITION = 1e10


class StatsError(ValueError):
    pass


# --------------------------------------------------------------------------
# Mann-Whitney-Wilcoxon
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class RankTestResult:
    u_statistic: float
    method: str  # "exact" or "normal"
    z: float | None
    p_value: float
    mean_a: float
    mean_b: float
    n_a: int
    n_b: int


def midranks(values: Sequence[float]) -> list[float]:
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        r = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = r
        i = j + 1
    return ranks


@lru_cache(maxsize=None)
def u_counts(m: int, n: int) -> tuple[int, ...]:
    """Number of group orderings giving each U = 0..m*n (no ties)."""
    if m == 0 or n == 0:
        return (1,)
    # the largest value belongs either to group A (adds n to U) or to group B
    from_a = u_counts(m - 1, n)
    from_b = u_counts(m, n - 1)
    out = [0] * (m * n + 1)
    for u, c in enumerate(from_a):
        out[u + n] += c
    for u, c in enumerate(from_b):
        out[u] += c
    return tuple(out)


def exact_u_pvalue(u: float, m: int, n: int) -> float:
    counts = u_counts(m, n)
    total = sum(counts)
    k = int(round(u))
    lower = sum(counts[: k + 1]) / total
    upper = sum(counts[k:]) / total
    return min(1.0, 2.0 * min(lower, upper))


def normal_u_pvalue(u: float, m: int, n: int, ties: Sequence[int] = ()) -> tuple[float, float]:
    """Normal approximation with tie and continuity correction; returns (z, p)."""
    big_n = m + n
    tie_term = sum(t ** 3 - t for t in ties) / (big_n * (big_n - 1)) if big_n > 1 else 0.0
    var = m * n / 12.0 * ((big_n + 1) - tie_term)
    if var <= 0:
        return 0.0, 1.0
    diff = abs(u - m * n / 2.0)
    z = max(diff - 0.5, 0.0) / math.sqrt(var)
    return z, min(1.0, 2.0 * normal_sf(z))


def mann_whitney(group_a: Sequence[float], group_b: Sequence[float], exact_max_n: int = EXACT_MAX_N) -> RankTestResult:
    """Two-sided rank-sum test; exact when n_a + n_b <= exact_max_n and no ties."""
    a, b = [float(x) for x in group_a], [float(x) for x in group_b]
    m, n = len(a), len(b)
    if m == 0 or n == 0:
        raise StatsError("mann_whitney needs two non-empty groups")
    pooled = a + b
    ranks = midranks(pooled)
    u = sum(ranks[:m]) - m * (m + 1) / 2.0
    tie_sizes = [c for c in _run_lengths(sorted(pooled)) if c > 1]
    if m + n <= exact_max_n and not tie_sizes:
        return RankTestResult(u, "exact", None, exact_u_pvalue(u, m, n), _avg(a), _avg(b), m, n)
    z, p = normal_u_pvalue(u, m, n, tie_sizes)
    return RankTestResult(u, "normal", z, p, _avg(a), _avg(b), m, n)


def _run_lengths(xs):
    out, i = [], 0
    while i < len(xs):
        j = i
        while j + 1 < len(xs) and xs[j + 1] == xs[i]:
            j += 1
        out.append(j - i + 1)
        i = j + 1
    return out


def _avg(xs):
    return sum(xs) / len(xs)


# --------------------------------------------------------------------------
# Pearson
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class CorrelationResult:
    r: float
    t_statistic: float
    p_value: float
    n: int


def pearson_test(x: Sequence[float], y: Sequence[float]) -> CorrelationResult:
    if len(x) != len(y):
        raise StatsError("pearson_test needs equal-length samples")
    n = len(x)
    if n < 3:
        raise StatsError("pearson_test needs n >= 3")
    mx, my = _avg(x), _avg(y)
    dx = [v - mx for v in x]
    dy = [v - my for v in y]
    sxx = sum(v * v for v in dx)
    syy = sum(v * v for v in dy)
    if sxx == 0 or syy == 0:
        raise StatsError("pearson_test: zero variance")
    r = sum(p * q for p, q in zip(dx, dy)) / math.sqrt(sxx * syy)
    if abs(r) > 1.0 - 1e-12:  # exact linear relation up to rounding
        r = math.copysign(1.0, r)
    if abs(r) == 1.0:
        t = math.copysign(math.inf, r)
    else:
        t = r * math.sqrt((n - 2) / (1.0 - r * r))
    return CorrelationResult(r, t, t_two_sided(t, n - 2), n)


# --------------------------------------------------------------------------
# OLS on z-normalised regressors
# --------------------------------------------------------------------------

TERMS = ("intercept", "pvc6", "bcr")


@dataclass(frozen=True)
class RegressionResult:
    coefficients: dict[str, float]
    std_errors: dict[str, float]
    t_values: dict[str, float]
    p_values: dict[str, float]
    r_squared: float
    adj_r_squared: float
    residual_se: float
    df: int
    f_statistic: float
    f_p_value: float
    n: int


def znorm(x: Sequence[float]) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    sd = arr.std(ddof=1)
    if np.ptp(arr) == 0 or not sd > 0:
        raise StatsError("cannot normalise a regressor with zero variance")
    return (arr - arr.mean()) / sd


def ols_normalized(bid_values: Sequence[float], pvc6: Sequence[float], bcr: Sequence[float]) -> RegressionResult:
    """Fit bid = b1 + b2*z(pvc6) + b3*z(bcr) with classical standard errors."""
    y = np.asarray(bid_values, dtype=float)
    n = len(y)
    if not len(pvc6) == len(bcr) == n:
        raise StatsError("ols_normalized needs equal-length inputs")
    if n <= 3:
        raise StatsError("ols_normalized needs n >= 4")
    X = np.column_stack([np.ones(n), znorm(pvc6), znorm(bcr)])
    if np.linalg.cond(X) > MAX_CONDITION:
        raise StatsError("regressors are collinear")
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ beta
    df = n - 3
    rss = float(resid @ resid)
    tss = float(((y - y.mean()) ** 2).sum())
    sigma2 = rss / df
    cov = sigma2 * np.linalg.inv(X.T @ X)
    se = np.sqrt(np.diag(cov))
    r2 = 0.0 if tss == 0 else max(0.0, 1.0 - rss / tss)
    adj = 1.0 - (1.0 - r2) * (n - 1) / df
    if tss == 0:
        f_stat, f_p = 0.0, 1.0
    elif rss == 0:
        f_stat, f_p = math.inf, 0.0
    else:
        f_stat = (max(tss - rss, 0.0) / 2.0) / (rss / df)
        f_p = f_sf(f_stat, 2, df)
    coefs, ses, ts, ps = {}, {}, {}, {}
    for k, term in enumerate(TERMS):
        coefs[term] = float(beta[k])
        ses[term] = float(se[k])
        if se[k] > 0:
            t = beta[k] / se[k]
            ts[term], ps[term] = float(t), t_two_sided(float(t), df)
        elif beta[k] != 0:
            ts[term], ps[term] = math.copysign(math.inf, beta[k]), 0.0
        else:
            ts[term], ps[term] = math.nan, math.nan
    return RegressionResult(coefs, ses, ts, ps, r2, adj, math.sqrt(sigma2), df, f_stat, f_p, n)
