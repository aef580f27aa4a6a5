"""Seeded synthetic cohorts with planted pairwise associations and orderings.

Each patient gets a home age band; by default every diagnosis falls inside it,
and a small ``spread`` fraction of diagnoses lands anywhere in [0, max_age]
so strata overlap the way real first-diagnosis data does.  A planted pair's
joint presence is drawn from the 2x2 cell distribution that has the requested
marginals and odds ratio, so the pair's population OR is exact by construction.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .catalog import (
    SEXES, ConditionCatalog, DiagnosisRecord, Patient, ValidationError, load_catalog, make_bands,
)
from .config import _float, _int, parse_cuts, read_kv

BLOCK_SIZE = 1000
ETHNICITIES = (("White", 0.85), ("South Asian", 0.022), ("Black", 0.022), ("Mixed/Other", 0.022))


class InfeasibleSpecError(ValidationError):
    pass


@dataclass(frozen=True)
class PlantedPair:
    first: str
    second: str
    odds_ratio: float
    gap_years: float
    direction_fraction: float = 0.9

    @property
    def name(self) -> str:
        return f"{self.first}/{self.second}"


@dataclass
class SynthSpec:
    n_patients: int = 10000
    seed: int = 0
    bands: tuple[float, ...] = (45.0, 65.0)
    band_weights: tuple[float, ...] = (0.5, 0.3, 0.2)
    max_age: int = 95
    spread: float = 0.05
    default_prevalence: float = 0.06
    prevalence: dict[str, float] = field(default_factory=dict)
    planted: list[PlantedPair] = field(default_factory=list)
    catalog: str | None = None
    integer_ages: bool = True

    def prevalence_of(self, cid: str) -> float:
        return self.prevalence.get(cid, self.default_prevalence)

    def apply(self, key: str, value: str) -> None:
        if key == "n_patients":
            self.n_patients = _int(value, key)
        elif key == "seed":
            self.seed = _int(value, key)
        elif key == "bands":
            self.bands = parse_cuts(value)
        elif key == "band_weights":
            self.band_weights = parse_cuts(value)
        elif key == "max_age":
            self.max_age = _int(value, key)
        elif key == "spread":
            self.spread = _float(value, key)
        elif key == "prevalence":
            if "=" in value:
                cid, v = value.split("=", 1)
                self.prevalence[cid.strip()] = _float(v, value)
            else:
                self.default_prevalence = _float(value, key)
        elif key == "planted":
            parts = [p.strip() for p in value.split(",")]
            if len(parts) not in (4, 5):
                raise ValidationError(f"planted expects first,second,or,gap[,fraction]: {value!r}")
            frac = _float(parts[4], value) if len(parts) == 5 else 0.9
            self.planted.append(PlantedPair(parts[0], parts[1], _float(parts[2], value), _float(parts[3], value), frac))
        elif key == "catalog":
            self.catalog = value or None
        elif key == "integer_ages":
            self.integer_ages = value.strip().lower() in ("1", "true", "yes", "on")
        else:
            raise ValidationError(f"unknown synth key {key!r}")

    @classmethod
    def from_file(cls, path: str | Path) -> "SynthSpec":
        spec = cls()
        for k, v in read_kv(path):
            spec.apply(k, v)
        return spec


def joint_cells(p_a: float, p_b: float, odds_ratio: float) -> tuple[float, float, float, float]:
    """(p11, p10, p01, p00) with the given marginals and odds ratio."""
    if odds_ratio == 1:
        p11 = p_a * p_b
    else:
        # p11 (1 - pa - pb + p11) = OR (pa - p11)(pb - p11), a quadratic in p11
        qa = 1 - odds_ratio
        qb = (1 - p_a - p_b) + odds_ratio * (p_a + p_b)
        qc = -odds_ratio * p_a * p_b
        disc = math.sqrt(qb * qb - 4 * qa * qc)
        roots = ((-qb + disc) / (2 * qa), (-qb - disc) / (2 * qa))
        lo, hi = max(0.0, p_a + p_b - 1), min(p_a, p_b)
        p11 = next(r for r in roots if lo - 1e-12 <= r <= hi + 1e-12)
    return p11, p_a - p11, p_b - p11, 1 - p_a - p_b + p11


def check_spec(spec: SynthSpec, catalog: ConditionCatalog) -> None:
    if spec.n_patients < 1:
        raise InfeasibleSpecError("n_patients must be >= 1")
    bands = make_bands(spec.bands)
    if len(spec.band_weights) != len(bands):
        raise InfeasibleSpecError(f"band_weights needs {len(bands)} values, got {len(spec.band_weights)}")
    if any(w < 0 for w in spec.band_weights) or sum(spec.band_weights) <= 0:
        raise InfeasibleSpecError("band_weights must be non-negative with a positive sum")
    if spec.max_age <= bands[-1].lower_inclusive or spec.max_age > 120:
        raise InfeasibleSpecError("max_age must exceed the last band's lower bound and be <= 120")
    if not 0 <= spec.spread <= 1:
        raise InfeasibleSpecError("spread must be in [0, 1]")
    for cid, p in [("default", spec.default_prevalence), *spec.prevalence.items()]:
        if not 0 < p < 1:
            raise InfeasibleSpecError(f"prevalence of {cid} must be in (0, 1), got {p}")
        if cid != "default" and cid not in catalog:
            raise InfeasibleSpecError(f"prevalence given for unknown condition {cid!r}")
    used: set[str] = set()
    narrowest = min(min(b.upper_exclusive, spec.max_age + 1) - b.lower_inclusive for b in bands)
    for pp in spec.planted:
        for cid in (pp.first, pp.second):
            if cid not in catalog:
                raise InfeasibleSpecError(f"planted pair {pp.name}: unknown condition {cid!r}")
            if cid in used:
                raise InfeasibleSpecError(f"planted pair {pp.name}: {cid!r} already belongs to another planted pair")
            used.add(cid)
        if pp.first == pp.second:
            raise InfeasibleSpecError(f"planted pair {pp.name}: conditions must differ")
        if not (math.isfinite(pp.odds_ratio) and pp.odds_ratio > 0):
            raise InfeasibleSpecError(f"planted pair {pp.name}: odds ratio must be finite and > 0")
        if pp.gap_years < 0 or pp.gap_years + 1 > narrowest:
            raise InfeasibleSpecError(f"planted pair {pp.name}: gap {pp.gap_years:g} does not fit the narrowest band")
        if not 0.5 <= pp.direction_fraction <= 1:
            raise InfeasibleSpecError(f"planted pair {pp.name}: direction fraction must be in [0.5, 1]")
        if catalog[pp.first].sex_applicability != catalog[pp.second].sex_applicability:
            raise InfeasibleSpecError(f"planted pair {pp.name}: conditions apply to different sexes")
        p11, *_ = joint_cells(spec.prevalence_of(pp.first), spec.prevalence_of(pp.second), pp.odds_ratio)
        smallest = min(w for w in spec.band_weights if w > 0) / sum(spec.band_weights)
        if p11 * spec.n_patients * smallest < 1:
            raise InfeasibleSpecError(
                f"planted pair {pp.name}: odds ratio {pp.odds_ratio:g} implies fewer than one joint case per band"
            )


def _draw_presence(rng, n: int, conds: Sequence[str], spec: SynthSpec, planted: Sequence[PlantedPair]):
    idx = {c: j for j, c in enumerate(conds)}
    pres = np.zeros((n, len(conds)), dtype=bool)
    in_pair = set()
    for pp in planted:
        cells = joint_cells(spec.prevalence_of(pp.first), spec.prevalence_of(pp.second), pp.odds_ratio)
        k = rng.choice(4, size=n, p=np.clip(cells, 0, None) / sum(np.clip(cells, 0, None)))
        pres[:, idx[pp.first]] = (k == 0) | (k == 1)
        pres[:, idx[pp.second]] = (k == 0) | (k == 2)
        in_pair.update((pp.first, pp.second))
    for c in conds:
        if c not in in_pair:
            pres[:, idx[c]] = rng.random(n) < spec.prevalence_of(c)
    return pres


def _block(seed_seq, sex: str, start: int, n: int, conds, spec: SynthSpec, planted, bands):
    rng = np.random.default_rng(seed_seq)
    weights = np.asarray(spec.band_weights, dtype=float)
    weights /= weights.sum()
    pres = _draw_presence(rng, n, conds, spec, planted)
    # the cohort is people with at least one condition: redraw empty rows
    empty = ~pres.any(axis=1)
    while empty.any():
        pres[empty] = _draw_presence(rng, int(empty.sum()), conds, spec, planted)
        empty = ~pres.any(axis=1)
    home = rng.choice(len(bands), size=n, p=weights)
    lo = np.array([bands[h].lower_inclusive for h in home])
    hi = np.array([min(bands[h].upper_exclusive, spec.max_age + 1) for h in home])

    def draw_age(low, high, size):
        if spec.integer_ages:
            return np.floor(rng.uniform(low, high, size))
        return np.round(rng.uniform(low, high, size), 2)

    ages = draw_age(lo[:, None], hi[:, None], (n, len(conds)))
    stray = rng.random((n, len(conds))) < spec.spread
    ages = np.where(stray, draw_age(0, spec.max_age + 1, (n, len(conds))), ages)
    idx = {c: j for j, c in enumerate(conds)}
    for pp in planted:
        ja, jb = idx[pp.first], idx[pp.second]
        both = pres[:, ja] & pres[:, jb]
        mean_gap = pp.gap_years
        gap = 1 + rng.poisson(max(mean_gap - 1, 0), n) if mean_gap >= 1 else np.zeros(n)
        gap = np.minimum(gap, hi - lo - 1)
        if not spec.integer_ages:
            gap = gap.astype(float)
        start_age = draw_age(lo, hi - gap, n)
        forward = rng.random(n) < pp.direction_fraction
        a_age = np.where(forward, start_age, start_age + gap)
        b_age = np.where(forward, start_age + gap, start_age)
        ages[both, ja] = a_age[both]
        ages[both, jb] = b_age[both]
    ages = np.minimum(ages, spec.max_age)
    prefix = "F" if sex == "female" else "M"
    patients, records = [], []
    eth_names = [e for e, _ in ETHNICITIES] + [None]
    eth_p = [p for _, p in ETHNICITIES]
    eth_p.append(1 - sum(eth_p))
    eth = rng.choice(len(eth_names), size=n, p=eth_p)
    imd = rng.integers(1, 6, size=n)
    imd_missing = rng.random(n) < 0.002
    extra_years = rng.integers(0, 11, size=n)
    for i in range(n):
        pid = f"{prefix}{start + i:07d}"
        row_ages = ages[i, pres[i]]
        attained = float(min(spec.max_age, row_ages.max() + extra_years[i]))
        patients.append(Patient(
            pid, sex, eth_names[eth[i]], None if imd_missing[i] else int(imd[i]), attained,
        ))
        for j in np.flatnonzero(pres[i]):
            records.append(DiagnosisRecord(pid, conds[j], float(ages[i, j])))
    return patients, records


def generate_cohort(
    spec: SynthSpec, catalog: ConditionCatalog | None = None
) -> tuple[list[Patient], list[DiagnosisRecord]]:
    """Deterministic for a fixed seed; blocks of patients use derived seeds."""
    catalog = catalog or load_catalog(spec.catalog)
    check_spec(spec, catalog)
    bands = make_bands(spec.bands)
    root = np.random.SeedSequence(spec.seed)
    patients, records = [], []
    for s, sex_seq in zip(SEXES, root.spawn(len(SEXES))):
        conds = catalog.for_sex(s)
        planted = [pp for pp in spec.planted if catalog[pp.first].applies_to(s)]
        n_blocks = math.ceil(spec.n_patients / BLOCK_SIZE)
        for b, block_seq in enumerate(sex_seq.spawn(n_blocks)):
            start = b * BLOCK_SIZE
            n = min(BLOCK_SIZE, spec.n_patients - start)
            p, r = _block(block_seq, s, start + 1, n, conds, spec, planted, bands)
            patients.extend(p)
            records.extend(r)
    return patients, records


def _num(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(float(x))


def cohort_csv(records: Iterable[DiagnosisRecord], patients: Sequence[Patient]) -> str:
    sex_of = {p.patient_id: p.sex for p in patients}
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["patient_id", "sex", "condition_id", "age_at_first_diagnosis"])
    for r in records:
        w.writerow([r.patient_id, sex_of[r.patient_id], r.condition_id, _num(r.age_at_first_diagnosis)])
    return buf.getvalue()


def patients_csv(patients: Sequence[Patient]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["patient_id", "sex", "ethnicity", "imd_quintile", "age"])
    for p in patients:
        w.writerow([
            p.patient_id, p.sex, p.ethnicity or "", "" if p.imd_quintile is None else p.imd_quintile,
            "" if p.age is None else _num(p.age),
        ])
    return buf.getvalue()


def catalog_csv(catalog: ConditionCatalog) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["condition_id", "display_name", "system_category", "sex_applicability"])
    for e in catalog.entries:
        w.writerow([e.condition_id, e.display_name, e.system_category, e.sex_applicability])
    return buf.getvalue()


def write_cohort(spec: SynthSpec, out_dir: str | Path, catalog: ConditionCatalog | None = None) -> dict[str, Path]:
    """Write ``cohort.csv``, ``patients.csv`` and ``catalog.csv`` under ``out_dir``."""
    catalog = catalog or load_catalog(spec.catalog)
    patients, records = generate_cohort(spec, catalog)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {
        "cohort": out / "cohort.csv",
        "patients": out / "patients.csv",
        "catalog": out / "catalog.csv",
    }
    files["cohort"].write_text(cohort_csv(records, patients), encoding="utf-8", newline="")
    files["patients"].write_text(patients_csv(patients), encoding="utf-8", newline="")
    files["catalog"].write_text(catalog_csv(catalog), encoding="utf-8", newline="")
    return files
