"""Rank tests, binomial tail and Pearson correlation, written from first principles.

Exact null distributions are built by dynamic programming over *doubled*
ranks (average ranks are multiples of 1/2, so doubling keeps them integral)
with integer counts, which gives the same counts as enumerating every sign
assignment or labelling.
"""

from __future__ import annotations

import math
from collections import Counter
from fractions import Fraction
from typing import Sequence

import numpy as np

from ..model import StatTestResult

WILCOXON_EXACT_MAX = 25
MWU_EXACT_MAX = 14

GREATER = "greater"
LESS = "less"
TWO_SIDED = "two-sided"
_ALTERNATIVES = (GREATER, LESS, TWO_SIDED)


class AllZeroDifferences(ValueError):
    pass


class ConstantInput(ValueError):
    pass


def average_ranks(values: Sequence[float]) -> list[float]:
    """1-based ranks; tied values share the mean of the ranks they span."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        avg = (i + j + 2) / 2
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        i = j + 1
    return ranks


def _tie_term(values: Sequence[float]) -> int:
    return sum(t**3 - t for t in Counter(values).values())


def normal_sf(z: float) -> float:
    return 0.5 * math.erfc(z / math.sqrt(2))


def _check_alternative(alternative: str) -> None:
    if alternative not in _ALTERNATIVES:
        raise ValueError(f"alternative must be one of {_ALTERNATIVES}, not {alternative!r}")


def _tail(dist: np.ndarray, total: int, observed: int, alternative: str) -> float:
    upper = Fraction(int(dist[observed:].sum()), total)
    lower = Fraction(int(dist[: observed + 1].sum()), total)
    if alternative == GREATER:
        return float(upper)
    if alternative == LESS:
        return float(lower)
    return float(min(Fraction(1), 2 * min(upper, lower)))


def _approx_p(stat: float, mean: float, var: float, alternative: str, correction: bool) -> tuple[float, float]:
    if var <= 0:
        return 1.0, 0.0
    sd = math.sqrt(var)
    cc = 0.5 if correction else 0.0
    z_hi = (stat - mean - cc) / sd
    z_lo = (stat - mean + cc) / sd
    if alternative == GREATER:
        return normal_sf(z_hi), z_hi
    if alternative == LESS:
        return 1 - normal_sf(z_lo), z_lo
    z = max(abs(stat - mean) - cc, 0.0) / sd
    return min(1.0, 2 * normal_sf(z)), z


def _use_exact(method: str, size: int, limit: int) -> bool:
    if method not in ("auto", "exact", "approx"):
        raise ValueError(f"method must be auto, exact or approx, not {method!r}")
    return method == "exact" or (method == "auto" and size <= limit)


# -- Wilcoxon signed-rank ----------------------------------------------------

def _count_dtype(total: int):
    return np.int64 if total < 2**62 else object


def signed_rank_distribution(doubled_ranks: Sequence[int]) -> np.ndarray:
    """``dist[s]`` = number of the 2**m sign assignments with doubled W+ = s."""
    size = sum(doubled_ranks) + 1
    dist = np.zeros(size, dtype=_count_dtype(2 ** len(doubled_ranks)))
    dist[0] = 1
    for r in doubled_ranks:
        shifted = np.zeros_like(dist)
        shifted[r:] = dist[: size - r]
        dist = dist + shifted
    return dist


def wilcoxon_signed_rank(
    values: Sequence[float],
    mu0: float = 3.0,
    alternative: str = GREATER,
    method: str = "auto",
    correction: bool = True,
) -> StatTestResult:
    """One-sample signed-rank test of the median against ``mu0``.

    Zero differences are dropped; the statistic is W+ (sum of ranks of
    positive differences). W-, min(W+, W-) and the nonzero count m are in
    ``detail``. Exact when m <= 25 under ``method="auto"``.
    """
    _check_alternative(alternative)
    if len(values) < 1:
        raise ValueError("need at least one value")
    diffs = [v - mu0 for v in values]
    nonzero = [d for d in diffs if d != 0]
    m = len(nonzero)
    if m == 0:
        raise AllZeroDifferences("every value equals the reference median")
    ranks = average_ranks([abs(d) for d in nonzero])
    w_plus = sum(r for r, d in zip(ranks, nonzero) if d > 0)
    w_minus = m * (m + 1) / 2 - w_plus
    exact = _use_exact(method, m, WILCOXON_EXACT_MAX)
    detail = {"w_plus": w_plus, "w_minus": w_minus, "w_min": min(w_plus, w_minus), "m": m, "n_zero": len(values) - m}
    if exact:
        dist = signed_rank_distribution([round(2 * r) for r in ranks])
        p = _tail(dist, 2**m, round(2 * w_plus), alternative)
    else:
        mean = m * (m + 1) / 4
        var = m * (m + 1) * (2 * m + 1) / 24 - _tie_term([abs(d) for d in nonzero]) / 48
        p, z = _approx_p(w_plus, mean, var, alternative, correction)
        detail["z"] = z
        detail["continuity_correction"] = correction
    return StatTestResult(
        method="WilcoxonSignedRank",
        statistic=w_plus,
        p_value=min(max(p, 0.0), 1.0),
        n=len(values),
        alternative=f"{alternative} (median vs {mu0:g})",
        exact=exact,
        detail=detail,
    )


# -- Mann-Whitney U ----------------------------------------------------------

def rank_sum_distribution(doubled_ranks: Sequence[int], k: int) -> np.ndarray:
    """``dist[s]`` = number of size-``k`` subsets whose doubled rank sum is s."""
    size = sum(doubled_ranks) + 1
    layers = np.zeros((k + 1, size), dtype=_count_dtype(math.comb(len(doubled_ranks), k)))
    layers[0, 0] = 1
    for r in doubled_ranks:
        shifted = np.zeros_like(layers)
        shifted[1:, r:] = layers[:-1, : size - r]
        layers = layers + shifted
    return layers[k]


def mann_whitney_u(
    group1: Sequence[float],
    group2: Sequence[float],
    alternative: str = GREATER,
    method: str = "auto",
    correction: bool = True,
) -> StatTestResult:
    """Two-sample rank test; ``greater`` means group1 tends to be larger.

    Statistic U1 = R1 - n1(n1+1)/2. Exact when n1+n2 <= 14 under
    ``method="auto"``.
    """
    _check_alternative(alternative)
    n1, n2 = len(group1), len(group2)
    if n1 == 0 or n2 == 0:
        raise ValueError("both groups must be nonempty")
    pooled = list(group1) + list(group2)
    ranks = average_ranks(pooled)
    r1 = sum(ranks[:n1])
    u1 = r1 - n1 * (n1 + 1) / 2
    u2 = n1 * n2 - u1
    big_n = n1 + n2
    exact = _use_exact(method, big_n, MWU_EXACT_MAX)
    detail = {"u1": u1, "u2": u2, "u_min": min(u1, u2), "rank_sum1": r1}
    if exact:
        dist = rank_sum_distribution([round(2 * r) for r in ranks], n1)
        p = _tail(dist, math.comb(big_n, n1), round(2 * r1), alternative)
    else:
        mean = n1 * n2 / 2
        var = n1 * n2 / 12 * ((big_n + 1) - _tie_term(pooled) / (big_n * (big_n - 1)))
        p, z = _approx_p(u1, mean, var, alternative, correction)
        detail["z"] = z
        detail["continuity_correction"] = correction
    return StatTestResult(
        method="MannWhitneyU",
        statistic=u1,
        p_value=min(max(p, 0.0), 1.0),
        n=n1,
        n2=n2,
        alternative=f"{alternative} (group1 vs group2)",
        exact=exact,
        detail=detail,
    )


# -- binomial ----------------------------------------------------------------

def _log_binom_pmf(k: int, n: int, p: float) -> float:
    return (
        math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)
        + k * math.log(p) + (n - k) * math.log1p(-p)
    )


def _logaddexp(a: float, b: float) -> float:
    hi, lo = (a, b) if a >= b else (b, a)
    return hi + math.log1p(math.exp(lo - hi))


def _log_tail(ks: range, n: int, p: float) -> float:
    acc = -math.inf
    for k in ks:
        acc = _logaddexp(acc, _log_binom_pmf(k, n, p)) if acc != -math.inf else _log_binom_pmf(k, n, p)
    return acc


def binomial_test_one_sided(successes: int, n: int, p0: float = 0.5, alternative: str = GREATER) -> StatTestResult:
    """Exact binomial tail, summed in log space.

    ``greater``: P(X >= successes); ``less``: P(X <= successes). Terms are
    accumulated from the far end of the tail inward, which keeps the result
    monotone in ``successes``.
    """
    if alternative not in (GREATER, LESS):
        raise ValueError("alternative must be 'greater' or 'less'")
    if n < 1 or not 0 <= successes <= n:
        raise ValueError(f"need 0 <= successes <= n and n >= 1 (got {successes}, {n})")
    if not 0 < p0 < 1:
        raise ValueError("p0 must be in (0, 1)")
    if alternative == GREATER:
        p = 1.0 if successes == 0 else math.exp(_log_tail(range(n, successes - 1, -1), n, p0))
    else:
        p = 1.0 if successes == n else math.exp(_log_tail(range(0, successes + 1), n, p0))
    return StatTestResult(
        method="BinomialOneSided",
        statistic=successes / n,
        p_value=min(p, 1.0),
        n=n,
        alternative=f"{alternative} (proportion vs {p0:g})",
        exact=True,
        detail={"successes": successes},
    )


# -- Pearson -----------------------------------------------------------------

def _betacf(a: float, b: float, x: float) -> float:
    # Lentz continued fraction for the incomplete beta function
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1, a - 1
    c, d = 1.0, 1 - qab * x / qap
    d = 1 / (d if abs(d) > tiny else tiny)
    h = d
    for m in range(1, 500):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1 + aa * d
        d = 1 / (d if abs(d) > tiny else tiny)
        c = 1 + aa / c if abs(1 + aa / c) > tiny else tiny
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1 + aa * d
        d = 1 / (d if abs(d) > tiny else tiny)
        c = 1 + aa / c if abs(1 + aa / c) > tiny else tiny
        delta = d * c
        h *= delta
        if abs(delta - 1) < 1e-15:
            break
    return h


def regularized_beta(x: float, a: float, b: float) -> float:
    if x <= 0:
        return 0.0
    if x >= 1:
        return 1.0
    log_front = math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + a * math.log(x) + b * math.log1p(-x)
    if x < (a + 1) / (a + b + 2):
        return math.exp(log_front) * _betacf(a, b, x) / a
    return 1 - math.exp(log_front) * _betacf(b, a, 1 - x) / b


def pearson_r(x: Sequence[float], y: Sequence[float]) -> StatTestResult:
    """Two-pass (mean-centred) correlation with a two-sided t-based p-value."""
    n = len(x)
    if n != len(y):
        raise ValueError("x and y differ in length")
    if n < 2:
        raise ValueError("need at least two pairs")
    mx = math.fsum(x) / n
    my = math.fsum(y) / n
    dx = [a - mx for a in x]
    dy = [b - my for b in y]
    sxx = math.fsum(a * a for a in dx)
    syy = math.fsum(b * b for b in dy)
    if sxx == 0 or syy == 0:
        raise ConstantInput("correlation undefined for a constant variable")
    sxy = math.fsum(a * b for a, b in zip(dx, dy))
    r = max(-1.0, min(1.0, sxy / math.sqrt(sxx * syy)))
    df = n - 2
    if df == 0:
        p = 1.0
    elif abs(r) == 1.0:
        p = 0.0
    else:
        t2 = r * r * df / (1 - r * r)
        p = regularized_beta(df / (df + t2), df / 2, 0.5)
    return StatTestResult(
        method="Pearson", statistic=r, p_value=min(max(p, 0.0), 1.0), n=n,
        alternative="two-sided (rho != 0)", exact=False,
    )
