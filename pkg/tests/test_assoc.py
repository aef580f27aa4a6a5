import numpy as np
import pytest

from mltcnet.assoc import StratumMatrix, analyze_stratum, build_table, filter_significant
from mltcnet.catalog import Condition, ConditionCatalog
from mltcnet.stats import ContingencyTable, bh_fdr

import oracles
from builders import stratum


def catalog_of(*ids):
    return ConditionCatalog(tuple(Condition(c, c.upper(), "S") for c in ids))


def random_stratum(seed=1, n=400, k=6):
    rng = np.random.default_rng(seed)
    conds = [f"k{j}" for j in range(k)]
    events = {}
    for i in range(n):
        present = rng.random(k) < np.linspace(0.1, 0.5, k)
        ev = {c: float(rng.integers(0, 45)) for c, p in zip(conds, present) if p}
        if ev:
            events[f"P{i:04d}"] = ev
    return stratum(events), conds


def test_four_member_table():
    st_ = stratum({"P1": {"A": 1, "B": 2}, "P2": {"A": 1}, "P3": {"B": 3}, "P4": {"C": 4}})
    assert build_table(st_, "A", "B") == ContingencyTable(1, 1, 1, 1)


def test_matches_naive_recount():
    st_, conds = random_stratum()
    records = analyze_stratum(st_, catalog_of(*conds))
    assert records
    for r in records:
        assert (r.table.a, r.table.b, r.table.c, r.table.d) == oracles.recount(
            st_.members, st_.events, r.condition_a, r.condition_b)
        assert r.table == build_table(st_, r.condition_a, r.condition_b)


def test_co_occurrence_matrix():
    st_, conds = random_stratum(seed=3)
    m = StratumMatrix(st_, conds)
    co = m.co_occurrence()
    for i, a in enumerate(conds):
        for j, b in enumerate(conds):
            assert co[i, j] == oracles.recount(st_.members, st_.events, a, b)[0]


def test_three_conditions_three_pairs():
    st_ = stratum({"P1": {"a": 1, "b": 2, "c": 3}, "P2": {"a": 5}, "P3": {"c": 1}})
    assert [r.pair for r in analyze_stratum(st_, catalog_of("a", "b", "c"))] == [("a", "b"), ("a", "c"), ("b", "c")]


def test_zero_frequency_pairs_skipped():
    st_ = stratum({"P1": {"a": 1, "b": 2}, "P2": {"c": 5}})
    assert [r.pair for r in analyze_stratum(st_, catalog_of("a", "b", "c"))] == [("a", "b")]


def test_fdr_family_is_the_stratum():
    st_, conds = random_stratum(seed=5)
    raw = analyze_stratum(st_, catalog_of(*conds), fdr=False)
    adj = analyze_stratum(st_, catalog_of(*conds))
    assert [r.stats.p_adjusted for r in adj] == bh_fdr([r.stats.p_raw for r in raw])
    assert all(r.stats.p_adjusted == r.stats.p_raw for r in raw)


def test_planted_pair_has_smallest_adjusted_p():
    rng = np.random.default_rng(11)
    events = {}
    for i in range(2000):
        x = rng.random() < 0.3
        ev = {}
        if x:
            ev["x"] = 20.0
        if rng.random() < (0.7 if x else 0.05):
            ev["y"] = 25.0
        for c in ("u", "v", "w"):
            if rng.random() < 0.2:
                ev[c] = 30.0
        if ev:
            events[f"P{i}"] = ev
    recs = analyze_stratum(stratum(events), catalog_of("u", "v", "w", "x", "y"))
    best = min(recs, key=lambda r: r.stats.p_adjusted)
    assert best.pair == ("x", "y")


def test_temporal_attached():
    st_ = stratum({"P1": {"a": 1, "b": 2}, "P2": {"a": 3, "b": 9}})
    (r,) = analyze_stratum(st_, catalog_of("a", "b"))
    assert r.temporal.a_first == 2 and r.temporal.median_duration_years == 3.5


class TestFilter:
    def records(self):
        st_, conds = random_stratum(seed=9, n=600)
        return analyze_stratum(st_, catalog_of(*conds))

    def test_identity_bounds(self):
        recs = self.records()
        assert filter_significant(recs, alpha=1.0 + 1e-9, min_pair_freq=1, min_or=0) == recs

    def test_frequency_floor(self):
        recs = self.records()
        top = max(r.pair_freq for r in recs)
        assert filter_significant(recs, 1.1, top + 1) == []

    def test_all_conditions(self):
        recs = self.records()
        kept = filter_significant(recs, 0.05, 10, 1.5)
        assert all(r.stats.p_adjusted < 0.05 and r.pair_freq >= 10 and r.stats.odds_ratio >= 1.5 for r in kept)


def test_pair_order_invariant():
    from builders import assoc
    with pytest.raises(ValueError):
        from mltcnet.assoc import PairAssociation
        r = assoc("a", "b", odds_ratio=2, freq=10, n=100)
        PairAssociation(r.sex, r.band, "b", "a", r.n, r.table, r.stats, r.temporal)
