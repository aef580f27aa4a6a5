import numpy as np
import pytest

from mltcnet._fmt import fmt2, mask_count, pct, round_half_up
from mltcnet.catalog import DiagnosisRecord, Patient
from mltcnet.combos import Combination
from mltcnet.report import (
    ASSOCIATION_COLUMNS, PAIR_COLUMNS, condition_summary, demographics_table, emit_association_table,
    emit_combination_table, emit_condition_summary, emit_heatmap_matrix, emit_pair_table,
    format_duration, format_or, pooled_prevalence, prevalence_comparison,
)

import oracles
from builders import assoc


def rows(text):
    return [line.split("\t") for line in text.splitlines()]


class TestRounding:
    @pytest.mark.parametrize("x,expected", [(2.675, 2.68), (0.125, 0.13), (-1.005, -1.01), (7.565, 7.57)])
    def test_half_up(self, x, expected):
        assert round_half_up(x) == expected

    @pytest.mark.parametrize("count,total,expected", [
        (484, 6397, 7.57), (239, 6397, 3.74), (200, 8296, 2.41),
        (128, 1413, 9.06), (100, 3969, 2.52), (3571, 10168, 35.12),
    ])
    def test_reference_percentages(self, count, total, expected):
        assert pct(count, total) == pytest.approx(expected, abs=0.005)
        assert pct(count, total) == oracles.percent(count, total)

    def test_masking(self):
        assert [mask_count(x) for x in (0, 1, 7, 9, 10, 239)] == ["0", "-", "-", "-", "10", "239"]


class TestPairTable:
    def test_cells(self):
        r = assoc("Cerebral Palsy", "Epilepsy", odds_ratio=5.29, freq=484, n=6397, first="Cerebral Palsy",
                  direct=235, band="<45", sex="female")
        header, row = rows(emit_pair_table([r]))
        assert header == list(PAIR_COLUMNS)
        assert row[:5] == ["Cerebral Palsy", "Epilepsy", "5.29[4.23-6.61]", "484", "7.57"]
        assert row[6:] == ["Cerebral Palsy precedes Epilepsy", "235", "48.55"]

    def test_formatters(self):
        r = assoc("a", "b", odds_ratio=5.29, freq=20, n=100)
        from dataclasses import replace
        r = replace(r, stats=replace(r.stats, ci_low=4.53, ci_high=6.18))
        assert format_or(r) == "5.29[4.53-6.18]"
        assert format_duration(6.41, 1.39, 15.53) == "6.41 [1.39-15.53]"

    def test_small_counts_masked(self):
        r = assoc("a", "b", odds_ratio=3, freq=7, n=100, first="a", direct=6)
        (_, row) = rows(emit_pair_table([r]))
        assert row[3] == "-" and row[4] == "-" and row[7] == "-" and row[8] == "-"

    def test_tie_row(self):
        r = assoc("a", "b", odds_ratio=3, freq=101, n=1000, first=None)
        (_, row) = rows(emit_pair_table([r]))
        assert row[6:] == ["No clear precedence", "101", "100.00"]

    def test_sorted_and_filtered(self):
        rs = [assoc("a", "b", odds_ratio=3, freq=120, n=1000), assoc("a", "c", odds_ratio=3, freq=300, n=1000),
              assoc("b", "c", odds_ratio=3, freq=50, n=1000), assoc("c", "d", odds_ratio=3, freq=400, n=1000, p_adj=0.2)]
        table = rows(emit_pair_table(rs, alpha=0.05, min_pair_freq=100))
        assert [r[3] for r in table[1:]] == ["300", "120"]

    def test_group_pct_round_trip(self):
        r = assoc("a", "b", odds_ratio=3, freq=484, n=6397)
        (_, row) = rows(emit_pair_table([r]))
        assert round(float(row[4]) * 6397 / 100) == 484


def test_association_table_columns():
    text = emit_association_table([assoc("a", "b", odds_ratio=3, freq=5, n=100)])
    header, row = rows(text)
    assert header == list(ASSOCIATION_COLUMNS)
    assert row[2] == "-"


class TestCombinationTable:
    def test_row(self):
        c = Combination(("cerebral_palsy", "dysphagia", "epilepsy"), 200, pct(200, 8296))
        names = {"cerebral_palsy": "Cerebral Palsy", "dysphagia": "Dysphagia", "epilepsy": "Epilepsy"}
        (_, row) = rows(emit_combination_table([c], names))
        assert row == ["Cerebral Palsy + Dysphagia + Epilepsy", "3", "200", "2.41"]

    def test_empty(self):
        assert len(emit_combination_table([]).splitlines()) == 1

    def test_prevalence_floor(self):
        combos = [Combination(("a", "b", "c"), m, pct(m, 1000)) for m in (30, 50)]
        assert len(rows(emit_combination_table(combos, min_prevalence_pct=4.0))) == 2


class TestHeatmap:
    def test_cells(self):
        rs = [assoc("a", "b", odds_ratio=3, freq=239, n=1000), assoc("a", "c", odds_ratio=3, freq=8, n=1000),
              assoc("b", "c", odds_ratio=3, freq=500, n=1000, p_adj=0.3)]
        counts, pvals = emit_heatmap_matrix(rs, ["a", "b", "c"])
        c = rows(counts)
        assert c[0] == ["", "a", "b", "c"]
        assert c[1] == ["a", "", "239", "-"]
        assert c[2] == ["b", "239", "", ""]
        assert rows(pvals)[2][3] == "3.000e-01"


class TestSummaries:
    def test_single_patient(self):
        (s,) = condition_summary([Patient("P1", "male")], [DiagnosisRecord("P1", "x", 40.0)], "male", ["x"])
        assert (s.mean_age, s.sd_age, s.median_age, s.q1_age, s.q3_age) == (40, 0, 40, 40, 40)

    def test_against_numpy_oracle(self):
        rng = np.random.default_rng(0)
        ages = rng.uniform(0, 90, 500).round(1)
        pats = [Patient(f"P{i}", "female") for i in range(600)]
        recs = [DiagnosisRecord(f"P{i}", "x", float(a)) for i, a in enumerate(ages)]
        (s,) = condition_summary(pats, recs, "female", ["x"])
        assert s.mean_age == pytest.approx(sum(ages) / len(ages))
        mu = sum(ages) / len(ages)
        assert s.sd_age == pytest.approx((sum((a - mu) ** 2 for a in ages) / (len(ages) - 1)) ** 0.5)
        assert s.median_age == pytest.approx(oracles.quantile_interp(ages.tolist(), 0.5))
        assert s.pct_patients == oracles.percent(500, 600)

    def test_masked_row(self):
        pats = [Patient(f"P{i}", "male") for i in range(100)]
        recs = [DiagnosisRecord(f"P{i}", "x", 30.0) for i in range(3)]
        (_, row) = rows(emit_condition_summary(condition_summary(pats, recs, "male", ["x"])))
        assert row == ["x", "-", "-", "-", "-"]


class TestDemographics:
    def test_age_groups(self):
        pats = [Patient(f"F{i}", "female", age=85.0) for i in range(320)] + \
               [Patient(f"M{i}", "male", age=81.0) for i in range(250)]
        table = {r[0]: r[1:] for r in rows(demographics_table(pats))}
        assert table["80+"] == ["250", "320"]
        assert table["# Patients"] == ["250", "320"]

    def test_empty(self):
        assert len(demographics_table([]).splitlines()) == 1

    def test_small_cells_masked(self):
        pats = [Patient("F1", "female", "Black", 2, 30.0)] + [Patient(f"M{i}", "male", "White", 1, 30.0) for i in range(20)]
        table = {r[0]: r[1:] for r in rows(demographics_table(pats))}
        assert table["Black"] == ["0", "-"]
        assert table["White"] == ["20", "0"]


class TestPooled:
    @pytest.mark.parametrize("pm,pf,expected", [(35.12, 34.68, 34.93), (20.45, 22.28, 21.25)])
    def test_reference(self, pm, pf, expected):
        assert pooled_prevalence(pm, pf, 10168, 7976) == expected

    def test_fixed_point(self):
        assert pooled_prevalence(12.34, 12.34, 17, 9000) == 12.34

    def test_invalid(self):
        with pytest.raises(ValueError):
            pooled_prevalence(10, 10, 0, 0)
        with pytest.raises(ValueError):
            pooled_prevalence(101, 10, 5, 5)

    def test_table(self):
        from mltcnet.report import ConditionSummary
        m = [ConditionSummary("epilepsy", 0, 0, 0, 0, 0, 3571, 35.12)]
        f = [ConditionSummary("epilepsy", 0, 0, 0, 0, 0, 2766, 34.68),
             ConditionSummary("pcos", 0, 0, 0, 0, 0, 300, 3.76)]
        table = rows(prevalence_comparison(m, f, 10168, 7976, reference={"epilepsy": 1.2}))
        assert table[1] == ["epilepsy", "35.12", "34.68", "34.93", "1.2"]
        assert table[2] == ["pcos", "NA", "3.76", "3.76", ""]
