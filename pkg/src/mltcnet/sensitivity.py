"""Odds-ratio threshold sweep used to pick per-stratum network thresholds."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._fmt import fmt2, pct, round_half_up
from .assoc import PairAssociation, StratumMatrix
from .catalog import ConditionCatalog
from .network import ProgressionEdge, progression_edges
from .temporal import quantiles

DEFAULT_THRESHOLDS = tuple(range(2, 16))
COLUMNS = (
    "or_threshold", "num_trajectories", "coverage_percent", "system_pairs",
    "median_duration", "q1_duration", "q3_duration",
)


@dataclass(frozen=True)
class SensitivityRow:
    or_threshold: float
    num_trajectories: int
    coverage_percent: float
    system_pairs: int
    median_duration: float
    q1_duration: float
    q3_duration: float


def system_pairs(edges: Sequence[ProgressionEdge], catalog: ConditionCatalog) -> int:
    """Distinct unordered body-system pairs spanned by ``edges``."""
    seen = set()
    for e in edges:
        seen.add(tuple(sorted((catalog.category(e.from_condition), catalog.category(e.to_condition)))))
    return len(seen)


def sweep(
    assocs: Sequence[PairAssociation],
    matrix: StratumMatrix,
    catalog: ConditionCatalog,
    thresholds: Sequence[float] = DEFAULT_THRESHOLDS,
    *,
    alpha: float = 0.05,
    min_pair_freq: int = 100,
) -> list[SensitivityRow]:
    """One row per threshold; edges are the directed network edges at that OR cut."""
    if list(thresholds) != sorted(thresholds):
        raise ValueError("thresholds must be ascending")
    n = matrix.stratum.n
    base = progression_edges(assocs, alpha, min_pair_freq, 0.0)
    rows = []
    for thr in thresholds:
        kept = [(r, e) for r, e in base if e.odds_ratio >= thr]
        if not kept:
            rows.append(SensitivityRow(thr, 0, 0.0, 0, 0.0, 0.0, 0.0))
            continue
        covered = np.zeros(n, dtype=bool)
        durations = []
        for r, _ in kept:
            covered |= matrix.both(r.condition_a, r.condition_b)
            ages_a, ages_b = matrix.pair_ages(r.condition_a, r.condition_b)
            durations.append(np.abs(ages_b - ages_a))
        q1, med, q3 = quantiles(np.concatenate(durations), (0.25, 0.5, 0.75))
        rows.append(SensitivityRow(
            thr, len(kept), pct(int(covered.sum()), n),
            system_pairs([e for _, e in kept], catalog),
            round_half_up(med), round_half_up(q1), round_half_up(q3),
        ))
    return rows


def to_tsv(rows: Sequence[SensitivityRow]) -> str:
    out = ["\t".join(COLUMNS)]
    for r in rows:
        thr = f"{r.or_threshold:g}"
        out.append("\t".join([
            thr, str(r.num_trajectories), fmt2(r.coverage_percent), str(r.system_pairs),
            fmt2(r.median_duration), fmt2(r.q1_duration), fmt2(r.q3_duration),
        ]))
    return "\n".join(out) + "\n"
