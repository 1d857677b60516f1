"""Nonparametric two-sample tests and an exact binomial test, implemented from scratch.

All p-values are two-sided. Directionality of claims is handled upstream by
generating both ordered context pairs, so the tests themselves stay symmetric.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from enum import Enum

from .errors import StatsError

# Exact Mann-Whitney enumeration is used up to this combined sample size
# (and only when there are no ties); beyond it the normal approximation
# with tie correction and continuity correction applies.
DEFAULT_EXACT_THRESHOLD = 20


class TestMethod(str, Enum):
    KS_TWO_SAMPLE = "ks_two_sample"
    MANN_WHITNEY_U = "mann_whitney_u"
    BINOMIAL_EXACT = "binomial_exact"


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    method: TestMethod
    exact: bool

    def __post_init__(self):
        if not (0.0 <= self.p_value <= 1.0):
            raise StatsError(f"p-value out of range: {self.p_value}")
        if not math.isfinite(self.statistic):
            raise StatsError("test statistic must be finite")

    def to_dict(self) -> dict:
        return {
            "statistic": self.statistic,
            "p_value": self.p_value,
            "method": self.method.value,
            "exact": self.exact,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TestResult":
        return cls(d["statistic"], d["p_value"], TestMethod(d["method"]), d["exact"])


def _kolmogorov_sf(lam: float) -> float:
    """Two-sided Kolmogorov survival function 2*sum_{k>=1} (-1)^(k-1) exp(-2 k^2 lam^2).

    Series truncated once a term drops below 1e-12; result clamped to [0, 1].
    """
    if lam <= 0.0:
        return 1.0
    total = 0.0
    sign = 1.0
    k = 1
    while True:
        term = math.exp(-2.0 * k * k * lam * lam)
        total += sign * term
        if term < 1e-12:
            break
        sign = -sign
        k += 1
    return min(1.0, max(0.0, 2.0 * total))


def ks_two_sample(a: list[float], b: list[float]) -> TestResult:
    """Two-sample Kolmogorov-Smirnov test.

    D is the exact supremum of |ECDF_a - ECDF_b| over all sample points; the
    p-value uses the asymptotic Kolmogorov series with the small-sample
    lambda correction (sqrt(n_e) + 0.12 + 0.11/sqrt(n_e)) * D.
    """
    if not a or not b:
        raise StatsError("ks_two_sample requires non-empty samples")
    xs = sorted(a)
    ys = sorted(b)
    n1, n2 = len(xs), len(ys)
    d = 0.0
    for v in xs + ys:
        diff = abs(bisect.bisect_right(xs, v) / n1 - bisect.bisect_right(ys, v) / n2)
        if diff > d:
            d = diff
    n_e = n1 * n2 / (n1 + n2)
    lam = (math.sqrt(n_e) + 0.12 + 0.11 / math.sqrt(n_e)) * d
    p = 1.0 if d == 0.0 else _kolmogorov_sf(lam)
    return TestResult(d, p, TestMethod.KS_TWO_SAMPLE, exact=False)


def _midranks(pooled: list[float]) -> list[float]:
    """Ranks 1..n of the pooled sorted values, with ties sharing their midrank."""
    order = sorted(range(len(pooled)), key=lambda i: pooled[i])
    ranks = [0.0] * len(pooled)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and pooled[order[j + 1]] == pooled[order[i]]:
            j += 1
        mid = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = mid
        i = j + 1
    return ranks


def _exact_u_counts(n1: int, n2: int) -> list[int]:
    """Null distribution of U for sample sizes (n1, n2) without ties.

    counts[u] = number of rank subsets of size n1 whose U statistic equals u.
    Computed by the standard recurrence over ranks (dynamic programming).
    """
    max_u = n1 * n2
    # ways[j][u]: subsets of size j from ranks seen so far with U value u
    ways = [[0] * (max_u + 1) for _ in range(n1 + 1)]
    ways[0][0] = 1
    n = n1 + n2
    for r in range(1, n + 1):
        for j in range(min(r, n1), 0, -1):
            row = ways[j]
            prev = ways[j - 1]
            # picking rank r as the j-th member adds (r - j) to U
            add = r - j
            for u in range(max_u, add - 1, -1):
                if prev[u - add]:
                    row[u] += prev[u - add]
    return ways[n1]


def mann_whitney_u(
    a: list[float], b: list[float], exact_threshold: int = DEFAULT_EXACT_THRESHOLD
) -> TestResult:
    """Mann-Whitney U test with midranks for ties.

    Exact two-sided p by enumerating the null U distribution when the combined
    size is at most `exact_threshold` and there are no ties; otherwise the
    normal approximation with tie-corrected variance and continuity correction.
    """
    if not a or not b:
        raise StatsError("mann_whitney_u requires non-empty samples")
    n1, n2 = len(a), len(b)
    n = n1 + n2
    pooled = list(a) + list(b)
    if min(pooled) == max(pooled):
        # all values identical: U is degenerate
        return TestResult(n1 * n2 / 2.0, 1.0, TestMethod.MANN_WHITNEY_U, exact=True)
    ranks = _midranks(pooled)
    r_a = sum(ranks[:n1])
    u = r_a - n1 * (n1 + 1) / 2.0
    has_ties = len(set(pooled)) < n
    if n <= exact_threshold and not has_ties:
        counts = _exact_u_counts(n1, n2)
        total = sum(counts)
        ui = int(round(u))
        lo = sum(counts[: ui + 1]) / total
        hi = sum(counts[ui:]) / total
        p = min(1.0, 2.0 * min(lo, hi))
        return TestResult(u, p, TestMethod.MANN_WHITNEY_U, exact=True)
    mean_u = n1 * n2 / 2.0
    tie_term = 0.0
    seen: dict[float, int] = {}
    for v in pooled:
        seen[v] = seen.get(v, 0) + 1
    for t in seen.values():
        tie_term += t * t * t - t
    var_u = n1 * n2 / 12.0 * ((n + 1) - tie_term / (n * (n - 1)))
    if var_u <= 0.0:
        return TestResult(u, 1.0, TestMethod.MANN_WHITNEY_U, exact=True)
    z = u - mean_u
    if z > 0:
        z -= 0.5
    elif z < 0:
        z += 0.5
    z /= math.sqrt(var_u)
    p = min(1.0, math.erfc(abs(z) / math.sqrt(2.0)))
    return TestResult(u, p, TestMethod.MANN_WHITNEY_U, exact=False)


def _log_binom_pmf(j: int, n: int, p0: float) -> float:
    return (
        math.lgamma(n + 1)
        - math.lgamma(j + 1)
        - math.lgamma(n - j + 1)
        + j * math.log(p0)
        + (n - j) * math.log1p(-p0)
    )


def binomial_test(k: int, n: int, p0: float = 0.5) -> TestResult:
    """Exact two-sided binomial test.

    Sums P(X=j) over all j whose point probability does not exceed
    P(X=k) * (1 + 1e-9); log-space coefficients keep it stable for large n.
    """
    if not (0 <= k <= n) or n < 1:
        raise StatsError(f"invalid binomial counts k={k}, n={n}")
    if not (0.0 < p0 < 1.0):
        raise StatsError(f"p0 must lie strictly in (0,1), got {p0}")
    log_pk = _log_binom_pmf(k, n, p0)
    cutoff = log_pk + math.log1p(1e-9)
    p = 0.0
    included = 0
    for j in range(n + 1):
        if _log_binom_pmf(j, n, p0) <= cutoff:
            p += math.exp(_log_binom_pmf(j, n, p0))
            included += 1
    if included == n + 1:
        p = 1.0
    return TestResult(float(k), min(1.0, p), TestMethod.BINOMIAL_EXACT, exact=True)
