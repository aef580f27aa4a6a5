"""Multi-condition combinations whose every internal pair survived filtering."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import networkx as nx

from ._fmt import pct
from .assoc import PairAssociation, StratumMatrix

DEFAULT_CLIQUE_CAP = 10**6


class CombinationLimitError(RuntimeError):
    """Clique enumeration exceeded its work cap."""


@dataclass(frozen=True)
class Combination:
    conditions: tuple[str, ...]
    min_pair_freq: int
    prevalence_pct: float = 0.0
    exact_count: int | None = None

    @property
    def size(self) -> int:
        return len(self.conditions)


def pair_graph(filtered: Iterable[PairAssociation]) -> nx.Graph:
    g = nx.Graph()
    for r in filtered:
        g.add_edge(r.condition_a, r.condition_b, weight=r.pair_freq)
    return g


def enumerate_combinations(
    graph: nx.Graph,
    min_size: int = 3,
    max_size: int | None = None,
    *,
    n: int | None = None,
    cap: int = DEFAULT_CLIQUE_CAP,
) -> list[Combination]:
    """Every clique (maximal or not) with ``min_size <= size <= max_size``.

    Cliques are grown in increasing node order, extending only with common
    neighbours that sort after the last node, so each is produced once.
    Raises :class:`CombinationLimitError` after ``cap`` cliques have been visited.
    """
    if min_size < 2:
        raise ValueError("min_size must be at least 2")
    nodes = sorted(graph.nodes)
    rank = {v: i for i, v in enumerate(nodes)}
    later = {v: {u for u in graph[v] if rank[u] > rank[v]} for v in nodes}
    found: list[Combination] = []
    visited = 0

    stack: list[tuple[tuple[str, ...], set[str], int | None]] = [
        ((v,), later[v], None) for v in reversed(nodes)
    ]
    while stack:
        clique, cand, weakest = stack.pop()
        visited += 1
        if visited > cap:
            raise CombinationLimitError(f"more than {cap} cliques; set max_size or raise the cap")
        if len(clique) >= min_size:
            found.append(Combination(clique, weakest, pct(weakest, n) if n else 0.0))
        if max_size is not None and len(clique) >= max_size:
            continue
        for v in sorted(cand, key=rank.__getitem__, reverse=True):
            w = min(graph[u][v]["weight"] for u in clique)
            stack.append(
                (clique + (v,), cand & later[v], w if weakest is None else min(weakest, w))
            )
    found.sort(key=lambda c: (-c.min_pair_freq, c.size, c.conditions))
    return found


def combination_prevalence(combo: Combination, n: int) -> float:
    """Weakest-pair frequency as a percentage of the stratum."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return pct(combo.min_pair_freq, n)


def filter_combinations(combos: Sequence[Combination], min_prevalence_pct: float) -> list[Combination]:
    return [c for c in combos if c.prevalence_pct >= min_prevalence_pct]


def with_exact_counts(combos: Sequence[Combination], matrix: StratumMatrix) -> list[Combination]:
    """Attach the number of members holding every condition of each combination."""
    out = []
    for c in combos:
        idx = [matrix.index[x] for x in c.conditions]
        count = int(matrix.present[:, idx].all(axis=1).sum())
        out.append(Combination(c.conditions, c.min_pair_freq, c.prevalence_pct, count))
    return out

