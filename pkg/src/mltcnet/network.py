"""Directed progression graphs per stratum and their file exports."""

from __future__ import annotations

import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

import networkx as nx

from ._fmt import fmt2, mask_count, masked_int, pct, round_half_up
from .assoc import PairAssociation, filter_significant
from .temporal import Precedence, quantiles

FORMATS = ("dot", "graphml", "json")
BIN_PERCENTS = (0, 20, 40, 60, 80, 100)


@dataclass(frozen=True)
class ProgressionEdge:
    from_condition: str
    to_condition: str
    odds_ratio: float
    or_ci_low: float
    or_ci_high: float
    median_duration_years: float
    pair_freq: int
    thickness_bin: int = 0
    percentile_label: str = ""


@dataclass(frozen=True)
class LegendEntry:
    bin: int
    lo: int
    hi: int
    pct_lo: int
    pct_hi: int

    @property
    def label(self) -> str:
        lo, hi = mask_count(self.lo), mask_count(self.hi)
        return f"{lo} ≤ Frequency < {hi} ({self.pct_lo}%-{self.pct_hi}%)"


@dataclass(frozen=True)
class GraphSummary:
    n: int
    n_edges: int
    or_min: float
    or_max: float
    min_pair_freq: int
    min_prevalence_pct: float
    total_or: float


@dataclass(frozen=True)
class ProgressionGraph:
    sex: str
    band: str
    nodes: tuple[str, ...]
    edges: tuple[ProgressionEdge, ...]
    legend: tuple[LegendEntry, ...]
    summary: GraphSummary
    names: Mapping[str, str] = field(default_factory=dict, repr=False)

    def name(self, cid: str) -> str:
        return self.names.get(cid, cid)

    def caption(self) -> str:
        s = self.summary
        parts = [
            f"Sex: {self.sex.capitalize()}.",
            f"Age group: {self.band}.",
            f"Total patients with diagnoses in this group: {mask_count(s.n)}.",
        ]
        if s.n_edges:
            parts += [
                f"Odds ratio range: [{fmt2(s.or_min)}-{fmt2(s.or_max)}].",
                f"Observed minimum prevalence: {fmt2(s.min_prevalence_pct)}% ({mask_count(s.min_pair_freq)} patients).",
            ]
        parts += [
            f"Number of condition pairs shown: {s.n_edges}.",
            f"Total sum of odds ratios: {fmt2(s.total_or)}",
        ]
        return " ".join(parts)


def assign_thickness_bins(freqs: Sequence[int]) -> tuple[list[int], list[LegendEntry]]:
    """Quintile bins 1..5 of edge frequencies plus a legend with integer bounds.

    Bin k holds frequencies in [P(k-1), P(k)) of the 20/40/60/80th percentiles;
    bin 5 is "at or above the 80th".  Empty integer ranges fold into the next
    legend entry so degenerate distributions collapse to fewer rows.
    """
    if not freqs:
        return [], []
    cuts = quantiles(freqs, (0.2, 0.4, 0.6, 0.8))
    bins = [1 + sum(f >= c for c in cuts) for f in freqs]
    bounds = [min(freqs), *(math.ceil(c) for c in cuts), max(freqs) + 1]
    legend = []
    start_pct = BIN_PERCENTS[0]
    for k in range(5):
        lo, hi = bounds[k], bounds[k + 1]
        if hi <= lo:
            continue
        legend.append(LegendEntry(k + 1, lo, hi, start_pct, BIN_PERCENTS[k + 1]))
        start_pct = BIN_PERCENTS[k + 1]
    if legend and legend[-1].pct_hi != 100:
        last = legend[-1]
        legend[-1] = LegendEntry(last.bin, last.lo, last.hi, last.pct_lo, 100)
    return bins, legend


def progression_edges(
    assocs: Sequence[PairAssociation],
    alpha: float = 0.05,
    min_pair_freq: int = 100,
    or_threshold: float = 0.0,
) -> list[tuple[PairAssociation, ProgressionEdge]]:
    """Filtered pairs with a clear majority order, oriented first -> second."""
    out = []
    for r in filter_significant(assocs, alpha, min_pair_freq, or_threshold):
        t = r.temporal
        if t is None or t.precedence is Precedence.NONE:
            continue
        src, dst = r.pair if t.precedence is Precedence.A_PRECEDES_B else r.pair[::-1]
        out.append((r, ProgressionEdge(
            src, dst, r.stats.odds_ratio, r.stats.ci_low, r.stats.ci_high,
            t.median_duration_years, r.pair_freq,
        )))
    out.sort(key=lambda pe: (pe[1].from_condition, pe[1].to_condition))
    return out


def build_progression_graph(
    assocs: Sequence[PairAssociation],
    *,
    sex: str,
    band: str,
    n: int,
    alpha: float = 0.05,
    min_pair_freq: int = 100,
    or_threshold: float = 0.0,
    names: Mapping[str, str] | None = None,
) -> ProgressionGraph:
    raw = [e for _, e in progression_edges(assocs, alpha, min_pair_freq, or_threshold)]
    bins, legend = assign_thickness_bins([e.pair_freq for e in raw])
    by_bin = {entry.bin: entry for entry in legend}
    edges = []
    for e, b in zip(raw, bins):
        label = by_bin[b].label if b in by_bin else ""
        edges.append(ProgressionEdge(**{**asdict(e), "thickness_bin": b, "percentile_label": label}))
    nodes = sorted({c for e in edges for c in (e.from_condition, e.to_condition)})
    if edges:
        ors = [e.odds_ratio for e in edges]
        fmin = min(e.pair_freq for e in edges)
        summary = GraphSummary(
            n, len(edges), min(ors), max(ors), fmin, pct(fmin, n), round_half_up(math.fsum(ors), 2)
        )
    else:
        summary = GraphSummary(n, 0, 0.0, 0.0, 0, 0.0, 0.0)
    return ProgressionGraph(sex, band, tuple(nodes), tuple(edges), tuple(legend), summary, dict(names or {}))


# --- export ---------------------------------------------------------------

def _q(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def to_dot(g: ProgressionGraph) -> str:
    lines = [
        f"digraph {_q(f'{g.sex} {g.band}')} {{",
        f"  comment={_q(g.caption())};",
        "  node [shape=box];",
    ]
    for entry in g.legend:
        lines.append(f"  // legend bin {entry.bin}: {entry.label}")
    for v in g.nodes:
        lines.append(f"  {_q(g.name(v))};")
    for e in g.edges:
        label = f"OR={fmt2(e.odds_ratio)}; {fmt2(e.median_duration_years)} yrs"
        lines.append(
            f"  {_q(g.name(e.from_condition))} -> {_q(g.name(e.to_condition))} "
            f"[label={_q(label)}, penwidth={e.thickness_bin}];"
        )
    lines.append("}")
    return "\n".join(lines) + "\n"


def _edge_attrs(e: ProgressionEdge, freq=masked_int) -> dict:
    return {
        "or": e.odds_ratio,
        "or_ci_low": e.or_ci_low,
        "or_ci_high": e.or_ci_high,
        "median_years": e.median_duration_years,
        "pair_freq": freq(e.pair_freq),
        "bin": e.thickness_bin,
    }


def to_graphml(g: ProgressionGraph) -> str:
    nxg = nx.DiGraph(caption=g.caption(), sex=g.sex, band=g.band)
    for v in g.nodes:
        nxg.add_node(v, name=g.name(v))
    for e in g.edges:
        # graphml keys are single-typed, so counts go out as (masked) strings
        nxg.add_edge(
            e.from_condition, e.to_condition, **_edge_attrs(e, mask_count), legend=e.percentile_label
        )
    buf = io.BytesIO()
    nx.write_graphml(nxg, buf, encoding="utf-8")
    return buf.getvalue().decode("utf-8")


def to_json(g: ProgressionGraph) -> str:
    doc = {
        "sex": g.sex,
        "band": g.band,
        "caption": g.caption(),
        "summary": {
            **asdict(g.summary),
            "n": masked_int(g.summary.n),
            "min_pair_freq": masked_int(g.summary.min_pair_freq),
        },
        "legend": [
            {"bin": e.bin, "pct_lo": e.pct_lo, "pct_hi": e.pct_hi, "label": e.label} for e in g.legend
        ],
        "nodes": [{"id": v, "name": g.name(v)} for v in g.nodes],
        "edges": [
            {"from": e.from_condition, "to": e.to_condition, **_edge_attrs(e), "legend": e.percentile_label}
            for e in g.edges
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def export_graph(g: ProgressionGraph, fmt: str) -> str:
    """Render ``g`` as DOT, GraphML or JSON text (deterministic)."""
    try:
        render = {"dot": to_dot, "graphml": to_graphml, "json": to_json}[fmt]
    except KeyError:
        raise ValueError(f"unknown graph format {fmt!r}; expected one of {', '.join(FORMATS)}") from None
    return render(g)
