"""Tests and effect sizes for 2x2 co-occurrence tables.

All functions are pure; nothing here knows about patients or strata.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass
from statistics import NormalDist
from typing import NamedTuple, Sequence

import numpy as np
from scipy.special import gammaln

FISHER = "fisher"
CHI_SQUARED = "chi_squared"

# relative slack when deciding "at most as probable as the observed table"
_FISHER_RTOL = 1e-12
_TINY = sys.float_info.min


@dataclass(frozen=True)
class ContingencyTable:
    """Counts of patients with both (a), only A (b), only B (c) and neither (d)."""

    a: int
    b: int
    c: int
    d: int

    def __post_init__(self):
        for name in "abcd":
            v = getattr(self, name)
            if int(v) != v or v < 0:
                raise ValueError(f"cell {name} must be a non-negative integer, got {v!r}")
            object.__setattr__(self, name, int(v))

    @property
    def n(self) -> int:
        return self.a + self.b + self.c + self.d

    @property
    def rows(self) -> tuple[int, int]:
        return self.a + self.b, self.c + self.d

    @property
    def cols(self) -> tuple[int, int]:
        return self.a + self.c, self.b + self.d

    def expected(self) -> tuple[float, float, float, float]:
        n = self.n
        (r1, r2), (c1, c2) = self.rows, self.cols
        return r1 * c1 / n, r1 * c2 / n, r2 * c1 / n, r2 * c2 / n

    def has_zero_margin(self) -> bool:
        return 0 in self.rows or 0 in self.cols


@dataclass(frozen=True)
class AssociationStats:
    p_raw: float
    p_adjusted: float
    odds_ratio: float
    ci_low: float
    ci_high: float
    cramers_v: float
    test_used: str
    or_corrected: bool = False


class OddsRatio(NamedTuple):
    odds_ratio: float
    ci_low: float
    ci_high: float
    corrected: bool


def _log_hypergeom(x: np.ndarray, r1: int, c1: int, n: int) -> np.ndarray:
    # log P(a = x) for fixed margins: C(c1, x) C(n - c1, r1 - x) / C(n, r1)
    return (
        gammaln(c1 + 1) - gammaln(x + 1) - gammaln(c1 - x + 1)
        + gammaln(n - c1 + 1) - gammaln(r1 - x + 1) - gammaln(n - c1 - r1 + x + 1)
        - gammaln(n + 1) + gammaln(r1 + 1) + gammaln(n - r1 + 1)
    )


def fisher_exact_two_sided(t: ContingencyTable) -> float:
    """Two-sided Fisher p: total probability of tables no more likely than ``t``."""
    n = t.n
    if n < 1:
        raise ValueError("Fisher's test needs n >= 1")
    r1, _ = t.rows
    c1, _ = t.cols
    lo, hi = max(0, r1 + c1 - n), min(r1, c1)
    if lo == hi:
        return 1.0
    x = np.arange(lo, hi + 1, dtype=float)
    logp = _log_hypergeom(x, r1, c1, n)
    log_obs = logp[t.a - lo]
    # normalise against the mode so the sum is immune to lgamma drift
    w = np.exp(logp - logp.max())
    keep = logp <= log_obs + math.log1p(_FISHER_RTOL)
    p = float(w[keep].sum() / w.sum())
    return min(1.0, max(p, _TINY))


def chi_squared_statistic(t: ContingencyTable) -> float:
    """Pearson X^2 without continuity correction."""
    if t.n < 1 or t.has_zero_margin():
        raise ValueError("chi-squared test undefined for a table with a zero margin")
    obs = (t.a, t.b, t.c, t.d)
    return float(sum((o - e) ** 2 / e for o, e in zip(obs, t.expected())))


def chi_squared_p(t: ContingencyTable) -> float:
    """Upper tail of chi-squared(1) at the Pearson statistic."""
    x2 = chi_squared_statistic(t)
    # chi2(1) survival function: P(Z^2 > x) = erfc(sqrt(x / 2))
    return min(1.0, max(math.erfc(math.sqrt(x2 / 2.0)), _TINY))


def select_test(t: ContingencyTable) -> tuple[float, str]:
    """Fisher when any expected count is below 5, chi-squared otherwise."""
    if t.n < 1:
        raise ValueError("empty table")
    if min(t.expected()) < 5:
        return fisher_exact_two_sided(t), FISHER
    return chi_squared_p(t), CHI_SQUARED


def odds_ratio_ci(t: ContingencyTable, level: float = 0.95) -> OddsRatio:
    """Woolf log-method CI; +0.5 on every cell when any cell is zero."""
    if not 0 < level < 1:
        raise ValueError("level must be in (0, 1)")
    a, b, c, d = t.a, t.b, t.c, t.d
    corrected = 0 in (a, b, c, d)
    if corrected:
        a, b, c, d = a + 0.5, b + 0.5, c + 0.5, d + 0.5
    z = NormalDist().inv_cdf(0.5 + level / 2)
    log_or = math.log(a) + math.log(d) - math.log(b) - math.log(c)
    se = math.sqrt(1 / a + 1 / b + 1 / c + 1 / d)
    return OddsRatio(
        math.exp(log_or), math.exp(log_or - z * se), math.exp(log_or + z * se), corrected
    )


def cramers_v(t: ContingencyTable) -> float:
    if t.n < 1 or t.has_zero_margin():
        return 0.0
    (r1, r2), (c1, c2) = t.rows, t.cols
    # integer products are exact; only the final division is float
    v = abs(t.a * t.d - t.b * t.c) / math.sqrt(r1 * r2 * c1 * c2)
    return min(1.0, v)


def bh_fdr(p_values: Sequence[float]) -> list[float]:
    """Benjamini-Hochberg step-up adjustment, returned in input order."""
    p = np.asarray(p_values, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise ValueError("bh_fdr needs a non-empty 1-d sequence")
    if np.any(~(p > 0)) or np.any(p > 1):
        raise ValueError("p-values must lie in (0, 1]")
    m = p.size
    order = np.argsort(p, kind="stable")
    # p * (m / i) rather than p * m / i: m / i >= 1 survives rounding, so q >= p
    ranked = p[order] * (m / np.arange(1, m + 1))
    q_sorted = np.minimum.accumulate(ranked[::-1])[::-1]
    q = np.empty(m)
    q[order] = np.minimum(q_sorted, 1.0)
    return q.tolist()


def analyze_table(t: ContingencyTable, level: float = 0.95) -> AssociationStats:
    """Everything but the FDR adjustment (``p_adjusted`` starts equal to ``p_raw``)."""
    p, test = select_test(t)
    ci = odds_ratio_ci(t, level)
    return AssociationStats(
        p_raw=p,
        p_adjusted=p,
        odds_ratio=ci.odds_ratio,
        ci_low=ci.ci_low,
        ci_high=ci.ci_high,
        cramers_v=cramers_v(t),
        test_used=test,
        or_corrected=ci.corrected,
    )
