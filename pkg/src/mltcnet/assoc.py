"""Pairwise association records per stratum."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

from ._fmt import pct
from .catalog import ConditionCatalog, Stratum
from .stats import AssociationStats, ContingencyTable, analyze_table, bh_fdr
from .temporal import TemporalSummary, summarize_ages


@dataclass(frozen=True)
class PairAssociation:
    sex: str
    band: str
    condition_a: str
    condition_b: str
    n: int
    table: ContingencyTable
    stats: AssociationStats
    temporal: TemporalSummary | None = None

    def __post_init__(self):
        if not self.condition_a < self.condition_b:
            raise ValueError("condition_a must sort before condition_b")

    @property
    def pair_freq(self) -> int:
        return self.table.a

    @property
    def group_pct(self) -> float:
        return pct(self.table.a, self.n)

    @property
    def pair(self) -> tuple[str, str]:
        return self.condition_a, self.condition_b


class StratumMatrix:
    """Dense presence / age view of a stratum over a fixed condition list."""

    def __init__(self, stratum: Stratum, conditions: Sequence[str]):
        self.stratum = stratum
        self.conditions = list(conditions)
        self.index = {c: j for j, c in enumerate(self.conditions)}
        ages = np.full((stratum.n, len(self.conditions)), np.nan)
        for i, pid in enumerate(stratum.members):
            for cid, age in stratum.events[pid].items():
                j = self.index.get(cid)
                if j is not None:
                    ages[i, j] = age
        self.ages = ages
        self.present = ~np.isnan(ages)

    def both(self, cond_a: str, cond_b: str) -> np.ndarray:
        return self.present[:, self.index[cond_a]] & self.present[:, self.index[cond_b]]

    def pair_ages(self, cond_a: str, cond_b: str) -> tuple[np.ndarray, np.ndarray]:
        rows = self.both(cond_a, cond_b)
        return self.ages[rows, self.index[cond_a]], self.ages[rows, self.index[cond_b]]

    def co_occurrence(self) -> np.ndarray:
        x = self.present.astype(np.int64)
        return x.T @ x


def build_table(stratum: Stratum, cond_a: str, cond_b: str) -> ContingencyTable:
    """Count members by presence of A and B inside the band."""
    a = b = c = 0
    for pid in stratum.members:
        ev = stratum.events[pid]
        has_a, has_b = cond_a in ev, cond_b in ev
        if has_a and has_b:
            a += 1
        elif has_a:
            b += 1
        elif has_b:
            c += 1
    return ContingencyTable(a, b, c, stratum.n - a - b - c)


def adjust(records: Sequence[PairAssociation]) -> list[PairAssociation]:
    """Benjamini-Hochberg over ``records`` as one family; order preserved."""
    if not records:
        return []
    q = bh_fdr([r.stats.p_raw for r in records])
    return [
        dataclasses.replace(r, stats=dataclasses.replace(r.stats, p_adjusted=qi))
        for r, qi in zip(records, q)
    ]


def analyze_stratum(
    stratum: Stratum,
    catalog: ConditionCatalog,
    *,
    level: float = 0.95,
    fdr: bool = True,
    conditions: Sequence[str] | None = None,
) -> list[PairAssociation]:
    """Test every applicable pair with pair_freq >= 1 and attach temporal summaries.

    With ``fdr=False`` the records keep ``p_adjusted == p_raw`` so a caller can
    pool several strata into one correction family.
    """
    conds = sorted(conditions) if conditions is not None else catalog.for_sex(stratum.sex)
    if stratum.n == 0:
        return []
    mat = StratumMatrix(stratum, conds)
    co = mat.co_occurrence()
    totals = np.diag(co)
    n = stratum.n
    out = []
    for i, j in combinations(range(len(conds)), 2):
        a = int(co[i, j])
        if a == 0:
            continue
        t = ContingencyTable(a, int(totals[i]) - a, int(totals[j]) - a, n - int(totals[i]) - int(totals[j]) + a)
        ages_a, ages_b = mat.pair_ages(conds[i], conds[j])
        out.append(
            PairAssociation(
                stratum.sex, stratum.band.label, conds[i], conds[j], n, t,
                analyze_table(t, level), summarize_ages(ages_a, ages_b),
            )
        )
    return adjust(out) if fdr else out


def filter_significant(
    assocs: Iterable[PairAssociation],
    alpha: float = 0.05,
    min_pair_freq: int = 1,
    min_or: float = 0.0,
) -> list[PairAssociation]:
    return [
        r for r in assocs
        if r.stats.p_adjusted < alpha and r.pair_freq >= min_pair_freq and r.stats.odds_ratio >= min_or
    ]
