"""Tab-separated table emitters with small-count masking.

Internal structures always carry raw counts; masking happens here, at render
time.  ``COUNT_COLUMNS`` lists the patient-count columns of every table kind
so callers (and the test-suite) can audit emitted files.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from ._fmt import fmt2, fmt_num, mask_count, pct, round_half_up
from .assoc import PairAssociation
from .catalog import DiagnosisRecord, Patient
from .combos import Combination
from .temporal import Precedence, quantiles

NO_PRECEDENCE = "No clear precedence"

PAIR_COLUMNS = (
    "Condition A", "Condition B", "Odds Ratio [CI]", "Pair freq.", "Group %",
    "Median duration years [IQR]", "Precedence", "Direct. freq.", "Direct. %",
)
ASSOCIATION_COLUMNS = (
    "condition_a", "condition_b", "pair_freq", "only_a", "only_b", "neither", "group_pct",
    "odds_ratio", "ci_low", "ci_high", "or_corrected", "test", "p_raw", "p_adjusted",
    "cramers_v", "a_first", "b_first", "ties", "precedence", "directionality_freq",
    "directionality_pct", "median_duration", "q1_duration", "q3_duration",
)
COMBINATION_COLUMNS = (
    "Combination", "No. of conditions", "Min. pair frequency", "Prevalence of combination %",
)
SUMMARY_COLUMNS = (
    "Condition", "Mean age at diagnosis [SD]", "Median age at diagnosis [Q1-Q3]",
    "No. of patients", "% of patients",
)

COUNT_COLUMNS: dict[str, tuple[str, ...]] = {
    "pairs": ("Pair freq.", "Direct. freq."),
    "associations": (
        "pair_freq", "only_a", "only_b", "neither", "a_first", "b_first", "ties", "directionality_freq",
    ),
    "combinations": ("Min. pair frequency", "Exact count"),
    "condition_summary": ("No. of patients",),
    "demographics": ("Male", "Female"),
    "heatmap_counts": ("*",),  # every cell
    "sensitivity": (),
    "prevalence": (),
    "heatmap_padj": (),
}


@dataclass(frozen=True)
class MaskedCount:
    raw: int

    @property
    def rendered(self) -> str:
        return mask_count(self.raw)


@dataclass(frozen=True)
class ConditionSummary:
    condition_id: str
    mean_age: float
    sd_age: float
    median_age: float
    q1_age: float
    q3_age: float
    n_patients: int
    pct_patients: float


def tsv(header: Sequence[str], rows: Iterable[Sequence[str]]) -> str:
    lines = ["\t".join(header)]
    lines.extend("\t".join(r) for r in rows)
    return "\n".join(lines) + "\n"


def _masked_pct(count: int, value: float) -> str:
    # a percentage next to a hidden count would reveal it
    return "-" if 1 <= count <= 9 else fmt2(value)


def precedence_text(r: PairAssociation, names: Mapping[str, str]) -> str:
    t = r.temporal
    if t is None or t.precedence is Precedence.NONE:
        return NO_PRECEDENCE
    a, b = names.get(r.condition_a, r.condition_a), names.get(r.condition_b, r.condition_b)
    return f"{a} precedes {b}" if t.precedence is Precedence.A_PRECEDES_B else f"{b} precedes {a}"


def format_or(r: PairAssociation) -> str:
    s = r.stats
    return f"{fmt2(s.odds_ratio)}[{fmt2(s.ci_low)}-{fmt2(s.ci_high)}]"


def format_duration(median: float, q1: float, q3: float) -> str:
    return f"{fmt2(median)} [{fmt2(q1)}-{fmt2(q3)}]"


def select_pairs(
    assocs: Iterable[PairAssociation],
    *,
    alpha: float | None = None,
    min_pair_freq: int = 1,
    min_group_pct: float = 0.0,
) -> list[PairAssociation]:
    """Rows for the pair table: frequency/percentage floor and optional significance."""
    out = [
        r for r in assocs
        if r.pair_freq >= min_pair_freq and r.group_pct >= min_group_pct
        and (alpha is None or r.stats.p_adjusted < alpha)
    ]
    out.sort(key=lambda r: (-r.pair_freq, r.condition_a, r.condition_b))
    return out


def emit_pair_table(
    assocs: Iterable[PairAssociation],
    names: Mapping[str, str] | None = None,
    *,
    alpha: float | None = None,
    min_pair_freq: int = 1,
    min_group_pct: float = 0.0,
) -> str:
    names = names or {}
    rows = []
    for r in select_pairs(assocs, alpha=alpha, min_pair_freq=min_pair_freq, min_group_pct=min_group_pct):
        t = r.temporal
        rows.append([
            names.get(r.condition_a, r.condition_a),
            names.get(r.condition_b, r.condition_b),
            format_or(r),
            mask_count(r.pair_freq),
            _masked_pct(r.pair_freq, r.group_pct),
            format_duration(t.median_duration_years, t.q1_duration_years, t.q3_duration_years),
            precedence_text(r, names),
            mask_count(t.directionality_freq),
            _masked_pct(t.directionality_freq, t.directionality_pct),
        ])
    return tsv(PAIR_COLUMNS, rows)


def emit_association_table(assocs: Iterable[PairAssociation]) -> str:
    """Every tested pair with full statistics (machine-oriented column names)."""
    rows = []
    for r in sorted(assocs, key=lambda r: r.pair):
        s, t, tab = r.stats, r.temporal, r.table
        rows.append([
            r.condition_a, r.condition_b,
            mask_count(tab.a), mask_count(tab.b), mask_count(tab.c), mask_count(tab.d),
            _masked_pct(tab.a, r.group_pct),
            fmt2(s.odds_ratio), fmt2(s.ci_low), fmt2(s.ci_high), str(s.or_corrected).lower(),
            s.test_used, f"{s.p_raw:.6e}", f"{s.p_adjusted:.6e}", f"{s.cramers_v:.4f}",
            mask_count(t.a_first), mask_count(t.b_first), mask_count(t.ties), t.precedence.value,
            mask_count(t.directionality_freq),
            _masked_pct(t.directionality_freq, t.directionality_pct),
            fmt2(t.median_duration_years), fmt2(t.q1_duration_years), fmt2(t.q3_duration_years),
        ])
    return tsv(ASSOCIATION_COLUMNS, rows)


def emit_combination_table(
    combos: Iterable[Combination],
    names: Mapping[str, str] | None = None,
    *,
    min_prevalence_pct: float = 0.0,
    exact: bool = False,
) -> str:
    names = names or {}
    header = COMBINATION_COLUMNS + (("Exact count",) if exact else ())
    rows = []
    for c in combos:
        if c.prevalence_pct < min_prevalence_pct:
            continue
        label = " + ".join(sorted(names.get(x, x) for x in c.conditions))
        row = [label, str(c.size), mask_count(c.min_pair_freq), _masked_pct(c.min_pair_freq, c.prevalence_pct)]
        if exact:
            row.append(mask_count(c.exact_count or 0))
        rows.append(row)
    return tsv(header, rows)


def emit_heatmap_matrix(
    assocs: Iterable[PairAssociation],
    conditions: Sequence[str],
    names: Mapping[str, str] | None = None,
    *,
    alpha: float = 0.05,
    min_cramers_v: float = 0.1,
) -> tuple[str, str]:
    """Symmetric (counts, adjusted p) matrices over ``conditions``.

    Count cells are blank unless the pair is significant with a non-trivial
    effect size; untested (zero-frequency) pairs are blank in both.
    """
    names = names or {}
    by_pair = {r.pair: r for r in assocs}
    labels = [names.get(c, c) for c in conditions]
    counts, pvals = [], []
    for ci in conditions:
        crow, prow = [names.get(ci, ci)], [names.get(ci, ci)]
        for cj in conditions:
            r = by_pair.get((min(ci, cj), max(ci, cj))) if ci != cj else None
            if r is None:
                crow.append("")
                prow.append("")
                continue
            shown = r.stats.p_adjusted < alpha and r.stats.cramers_v >= min_cramers_v
            crow.append(mask_count(r.pair_freq) if shown else "")
            prow.append(f"{r.stats.p_adjusted:.3e}")
        counts.append(crow)
        pvals.append(prow)
    header = ["", *labels]
    return tsv(header, counts), tsv(header, pvals)


def condition_summary(
    patients: Sequence[Patient],
    records: Sequence[DiagnosisRecord],
    sex: str,
    conditions: Sequence[str],
) -> list[ConditionSummary]:
    """Age-at-first-diagnosis statistics per condition within one sex."""
    sex_ids = {p.patient_id for p in patients if p.sex == sex}
    cohort = len(sex_ids)
    ages: dict[str, list[float]] = {c: [] for c in conditions}
    for rec in records:
        if rec.patient_id in sex_ids and rec.condition_id in ages:
            ages[rec.condition_id].append(rec.age_at_first_diagnosis)
    out = []
    for c in conditions:
        a = np.asarray(ages[c], dtype=float)
        if a.size == 0:
            out.append(ConditionSummary(c, math.nan, math.nan, math.nan, math.nan, math.nan, 0, 0.0))
            continue
        q1, med, q3 = quantiles(a, (0.25, 0.5, 0.75))
        sd = float(a.std(ddof=1)) if a.size > 1 else 0.0
        out.append(ConditionSummary(c, float(a.mean()), sd, med, q1, q3, int(a.size), pct(a.size, cohort)))
    return out


def _fmt1(x: float) -> str:
    return f"{round_half_up(x, 1):g}"


def emit_condition_summary(summaries: Iterable[ConditionSummary], names: Mapping[str, str] | None = None) -> str:
    names = names or {}
    rows = []
    for s in summaries:
        if s.n_patients == 0:
            rows.append([names.get(s.condition_id, s.condition_id), "NA", "NA", "0", fmt2(0.0)])
            continue
        masked = 1 <= s.n_patients <= 9
        rows.append([
            names.get(s.condition_id, s.condition_id),
            "-" if masked else f"{_fmt1(s.mean_age)} [{_fmt1(s.sd_age)}]",
            "-" if masked else f"{_fmt1(s.median_age)} [{_fmt1(s.q1_age)}-{_fmt1(s.q3_age)}]",
            mask_count(s.n_patients),
            _masked_pct(s.n_patients, s.pct_patients),
        ])
    return tsv(SUMMARY_COLUMNS, rows)


AGE_GROUPS = ((0, 20, "< 20"), (20, 30, "20-29"), (30, 40, "30-39"), (40, 50, "40-49"),
              (50, 60, "50-59"), (60, 70, "60-69"), (70, 80, "70-79"), (80, math.inf, "80+"))
IMD_LABELS = {1: "1 (Least Deprived)", 2: "2", 3: "3", 4: "4", 5: "5 (Most Deprived)"}


def demographics_table(patients: Sequence[Patient]) -> str:
    """Counts by sex for attained age, ethnicity and IMD quintile."""
    header = ("Characteristic", "Male", "Female")
    if not patients:
        return tsv(header, [])
    by_sex = {s: [p for p in patients if p.sex == s] for s in ("male", "female")}
    rows = [["# Patients", *(mask_count(len(by_sex[s])) for s in ("male", "female"))]]

    def section(title: str, keys: Sequence, key_fn, labels: Mapping) -> None:
        rows.append([title, "", ""])
        counts = {s: Counter(key_fn(p) for p in by_sex[s]) for s in by_sex}
        for k in keys:
            rows.append([labels.get(k, str(k)), mask_count(counts["male"][k]), mask_count(counts["female"][k])])

    if any(p.age is not None for p in patients):
        def age_group(p):
            if p.age is None:
                return "Unknown"
            return next(lbl for lo, hi, lbl in AGE_GROUPS if lo <= p.age < hi)
        keys = [lbl for _, _, lbl in AGE_GROUPS]
        if any(p.age is None for p in patients):
            keys.append("Unknown")
        section("Age", keys, age_group, {})

    eth = sorted({p.ethnicity for p in patients if p.ethnicity and p.ethnicity != "Unknown"})
    section("Ethnic groups", [*eth, "Unknown"], lambda p: p.ethnicity or "Unknown", {})
    section("IMD Quintiles", [1, 2, 3, 4, 5, "Unknown"], lambda p: p.imd_quintile or "Unknown", IMD_LABELS)
    return tsv(header, rows)


def pooled_prevalence(pct_male: float, pct_female: float, n_male: int, n_female: int) -> float:
    """Cohort-size-weighted average of the two sex-specific prevalences."""
    if n_male < 0 or n_female < 0 or n_male + n_female == 0:
        raise ValueError("need non-negative cohort sizes, not both zero")
    for p in (pct_male, pct_female):
        if not 0 <= p <= 100:
            raise ValueError(f"percentage out of range: {p}")
    total = n_male + n_female
    return round_half_up(pct_male * (n_male / total) + pct_female * (n_female / total), 2)


def prevalence_comparison(
    male: Sequence[ConditionSummary],
    female: Sequence[ConditionSummary],
    n_male: int,
    n_female: int,
    names: Mapping[str, str] | None = None,
    reference: Mapping[str, float] | None = None,
) -> str:
    """Per-condition prevalence by sex, pooled, and an optional external reference column."""
    names = names or {}
    m = {s.condition_id: s for s in male}
    f = {s.condition_id: s for s in female}
    header = ["Condition", "% males", "% females", "Total %"]
    if reference is not None:
        header.append("Reference population %")
    rows = []
    for cid in sorted(set(m) | set(f)):
        pm = m[cid].pct_patients if cid in m else None
        pf = f[cid].pct_patients if cid in f else None
        if pm is not None and pf is not None:
            total = fmt2(pooled_prevalence(pm, pf, n_male, n_female))
        elif pm is not None or pf is not None:
            total = fmt2(pm if pm is not None else pf)  # single-sex condition
        else:
            total = ""
        shown_m = "NA" if pm is None else _masked_pct(m[cid].n_patients, pm)
        shown_f = "NA" if pf is None else _masked_pct(f[cid].n_patients, pf)
        row = [names.get(cid, cid), shown_m, shown_f, total]
        if reference is not None:
            row.append(fmt_num(reference[cid]) if cid in reference else "")
        rows.append(row)
    return tsv(header, rows)
