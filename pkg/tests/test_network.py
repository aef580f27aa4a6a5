import json
import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from mltcnet.network import (
    assign_thickness_bins, build_progression_graph, export_graph, progression_edges, to_dot,
)

import oracles
from builders import assoc

# Reference pair rows (males 45-64 and males 65+): A, B, OR, pair freq, earlier condition.
MALES_45_64 = """\
Diabetes|Hypertension|9.73|253|Hypertension
Hypertension|Mental Illness|4.03|220|Mental Illness
Hypertension|Reflux Disorders|4.55|219|Reflux Disorders
Chronic Kidney Disease|Hypertension|5.36|206|Hypertension
Anaemia|Hypertension|4.53|178|Hypertension
Anaemia|Reflux Disorders|7.24|177|Reflux Disorders
Anaemia|Chronic Kidney Disease|9.12|175|Anaemia
Coronary Heart Disease|Hypertension|9.40|173|Hypertension
Chronic Arthritis|Hypertension|4.34|171|Hypertension
Mental Illness|Reflux Disorders|4.30|170|Mental Illness
Cardiac Arrhythmias|Hypertension|5.52|160|Hypertension
Dementia|Epilepsy|15.48|155|Dementia
Chronic Airway Diseases|Hypertension|5.09|152|Hypertension
Cardiac Arrhythmias|Chronic Kidney Disease|9.23|144|Cardiac Arrhythmias
Dysphagia|Reflux Disorders|5.95|140|Reflux Disorders
Chronic Airway Diseases|Reflux Disorders|6.02|128|Reflux Disorders
Chronic Kidney Disease|Diabetes|5.71|127|Diabetes
Chronic Kidney Disease|Mental Illness|3.46|126|Mental Illness
Hearing Loss|Hypertension|3.14|124|Hearing Loss
Chronic Kidney Disease|Reflux Disorders|3.73|123|Reflux Disorders
Anaemia|Mental Illness|3.59|123|Mental Illness
Cardiac Arrhythmias|Coronary Heart Disease|13.56|118|Coronary Heart Disease
Chronic Arthritis|Mental Illness|3.41|117|Mental Illness
Dementia|Dysphagia|9.29|112|Dementia
Hypertension|Insomnia|3.87|112|Insomnia
Chronic Kidney Disease|Dysphagia|5.12|110|Dysphagia
Chronic Arthritis|Reflux Disorders|3.44|109|Reflux Disorders
Diabetes|Reflux Disorders|3.52|107|Reflux Disorders
Diabetes|Mental Illness|3.16|107|Mental Illness
Chronic Pneumonia|Dysphagia|13.10|106|Chronic Pneumonia
Chronic Kidney Disease|Heart Failure|14.93|105|Heart Failure
Insomnia|Reflux Disorders|5.41|105|Insomnia
Insomnia|Mental Illness|4.86|105|Mental Illness
Cardiac Arrhythmias|Heart Failure|21.20|103|Cardiac Arrhythmias
Chronic Arthritis|Chronic Kidney Disease|3.96|103|Chronic Arthritis
Coronary Heart Disease|Heart Failure|27.51|101|Coronary Heart Disease
Anaemia|Dysphagia|4.84|101|Anaemia
Anaemia|Diabetes|4.34|101|Diabetes
Chronic Kidney Disease|Coronary Heart Disease|6.89|100|Coronary Heart Disease
Hypertension|Stroke|6.72|100|Hypertension
"""

MALES_65_PLUS = """\
Chronic Kidney Disease|Hypertension|26.19|180|Hypertension
Cardiac Arrhythmias|Chronic Kidney Disease|27.06|179|Cardiac Arrhythmias
Anaemia|Chronic Kidney Disease|26.34|148|Anaemia
Cardiac Arrhythmias|Hypertension|19.62|128|Hypertension
Chronic Kidney Disease|Heart Failure|33.41|123|Heart Failure
Cardiac Arrhythmias|Heart Failure|39.99|112|Cardiac Arrhythmias
Anaemia|Cardiac Arrhythmias|21.26|110|Anaemia
Chronic Kidney Disease|Dementia|14.52|107|Chronic Kidney Disease
Chronic Kidney Disease|Diabetes|23.06|103|Diabetes
Cardiac Arrhythmias|Coronary Heart Disease|34.42|97|Cardiac Arrhythmias
Chronic Kidney Disease|Coronary Heart Disease|23.15|97|Coronary Heart Disease
Anaemia|Hypertension|16.15|97|Hypertension
"""


def records(table: str, n: int, band: str):
    out = []
    for line in table.strip().splitlines():
        a, b, or_, freq, first = line.split("|")
        out.append(assoc(a, b, odds_ratio=float(or_), freq=int(freq), n=n, first=first, band=band))
    return out


def graph_of(table, n, band, thr):
    return build_progression_graph(
        records(table, n, band), sex="male", band=band, n=n, min_pair_freq=100, or_threshold=thr,
    )


class TestReferenceCaptions:
    def test_males_45_64(self):
        g = graph_of(MALES_45_64, 3969, "45-64", 4.03)
        assert g.summary.n_edges == 30
        assert g.caption() == (
            "Sex: Male. Age group: 45-64. Total patients with diagnoses in this group: 3969. "
            "Odds ratio range: [4.03-27.51]. Observed minimum prevalence: 2.52% (100 patients). "
            "Number of condition pairs shown: 30. Total sum of odds ratios: 253.37"
        )

    def test_males_65_plus(self):
        g = graph_of(MALES_65_PLUS, 1413, "65+", 14.52)
        assert g.caption() == (
            "Sex: Male. Age group: 65+. Total patients with diagnoses in this group: 1413. "
            "Odds ratio range: [14.52-39.99]. Observed minimum prevalence: 7.29% (103 patients). "
            "Number of condition pairs shown: 9. Total sum of odds ratios: 231.45"
        )

    def test_edges_follow_precedence(self):
        g = graph_of(MALES_65_PLUS, 1413, "65+", 14.52)
        pairs = {(e.from_condition, e.to_condition) for e in g.edges}
        assert ("Hypertension", "Chronic Kidney Disease") in pairs
        assert ("Cardiac Arrhythmias", "Heart Failure") in pairs


class TestEdges:
    def test_no_clear_precedence_dropped(self):
        rs = [assoc("a", "b", odds_ratio=5, freq=150, n=1000, first="a"),
              assoc("a", "c", odds_ratio=5, freq=150, n=1000, first=None)]
        assert [(e.from_condition, e.to_condition) for _, e in progression_edges(rs, 0.05, 100, 2)] == [("a", "b")]

    def test_orientation_from_later_id(self):
        rs = [assoc("a", "b", odds_ratio=5, freq=150, n=1000, first="b")]
        ((_, e),) = progression_edges(rs, 0.05, 100, 2)
        assert (e.from_condition, e.to_condition) == ("b", "a")

    def test_chain(self):
        rs = [assoc("a", "b", odds_ratio=5, freq=150, n=1000, first="a"),
              assoc("b", "c", odds_ratio=5, freq=150, n=1000, first="b")]
        g = build_progression_graph(rs, sex="female", band="<45", n=1000, or_threshold=2)
        assert [(e.from_condition, e.to_condition) for e in g.edges] == [("a", "b"), ("b", "c")]

    def test_filters(self):
        rs = [assoc("a", "b", odds_ratio=5, freq=99, n=1000, first="a"),
              assoc("a", "c", odds_ratio=1.5, freq=150, n=1000, first="a"),
              assoc("a", "d", odds_ratio=5, freq=150, n=1000, first="a", p_adj=0.05)]
        assert progression_edges(rs, 0.05, 100, 2) == []

    def test_empty(self):
        g = build_progression_graph([], sex="female", band="<45", n=10)
        assert g.edges == () and g.legend == () and g.nodes == ()
        assert "Number of condition pairs shown: 0" in g.caption()


class TestBins:
    def test_legend_shape(self):
        # quintile cut points land on 144 and 205 after rounding up
        freqs = [100, 144, 144, 200, 208, 230, 260, 300, 350, 400]
        bins, legend = assign_thickness_bins(freqs)
        cuts = [oracles.quantile_interp(freqs, p) for p in (0.2, 0.4)]
        assert [math.ceil(c) for c in cuts] == [144, 205]
        assert bins[freqs.index(144)] == 2
        assert legend[1].label == "144 ≤ Frequency < 205 (20%-40%)"

    def test_degenerate(self):
        bins, legend = assign_thickness_bins([150] * 7)
        assert len(set(bins)) == 1
        assert len(legend) == 1 and (legend[0].pct_lo, legend[0].pct_hi) == (0, 100)

    def test_uniform_against_sorted_ranks(self):
        rng = np.random.default_rng(3)
        freqs = rng.permutation(np.arange(100, 200)).tolist()
        bins, _ = assign_thickness_bins(freqs)
        cuts = [oracles.quantile_interp(freqs, p) for p in (0.2, 0.4, 0.6, 0.8)]
        expected = [1 + sum(f >= c for c in cuts) for f in freqs]
        assert bins == expected
        assert [bins.count(k) for k in range(1, 6)] == [20] * 5

    def test_legend_masks_small_bounds(self):
        _, legend = assign_thickness_bins([3, 5, 8, 40, 60])
        assert all("Frequency" in e.label for e in legend)
        assert legend[0].label.startswith("- ≤ Frequency")


class TestExport:
    def graph(self):
        rs = [assoc("a", "b", odds_ratio=5.123, freq=150, n=1000, first="a", median=3.333),
              assoc("b", "c", odds_ratio=2.5, freq=7, n=1000, first="c")]
        return build_progression_graph(rs, sex="female", band="<45", n=1000, min_pair_freq=1, or_threshold=2,
                                       names={"a": "Alpha", "b": "Beta", "c": "Gamma"})

    def test_dot(self):
        text = to_dot(self.graph())
        edges = [l for l in text.splitlines() if "->" in l]
        assert edges == [
            '  "Alpha" -> "Beta" [label="OR=5.12; 3.33 yrs", penwidth=5];',
            '  "Gamma" -> "Beta" [label="OR=2.50; 2.00 yrs", penwidth=1];',
        ]
        assert text.startswith('digraph "female <45" {')

    @pytest.mark.parametrize("fmt", ["dot", "graphml", "json"])
    def test_deterministic(self, fmt):
        assert export_graph(self.graph(), fmt) == export_graph(self.graph(), fmt)

    def test_json_masks_counts(self):
        doc = json.loads(export_graph(self.graph(), "json"))
        freqs = sorted(str(e["pair_freq"]) for e in doc["edges"])
        assert freqs == ["-", "150"]
        assert doc["summary"]["min_pair_freq"] == "-"

    def test_graphml_parses(self):
        root = ET.fromstring(export_graph(self.graph(), "graphml"))
        ns = {"g": "http://graphml.graphdrawing.org/xmlns"}
        assert len(root.findall(".//g:edge", ns)) == 2

    def test_unknown_format(self):
        with pytest.raises(ValueError, match="png"):
            export_graph(self.graph(), "png")
