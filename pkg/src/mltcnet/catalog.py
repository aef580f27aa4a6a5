"""Condition catalog, cohort ingestion and sex/age-band stratification."""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

SEXES = ("female", "male")
SEX_APPLICABILITY = ("both", "female_only", "male_only")

CATALOG_COLUMNS = ("condition_id", "display_name", "system_category", "sex_applicability")
COHORT_COLUMNS = ("patient_id", "sex", "condition_id", "age_at_first_diagnosis")
MAX_AGE = 120.0


class ValidationError(ValueError):
    """Input file or value violates a documented contract."""

    def __init__(self, message: str, path: str | Path | None = None, row: int | None = None):
        self.path = str(path) if path is not None else None
        self.row = row
        where = ""
        if self.path is not None:
            where = self.path if row is None else f"{self.path}:{row}"
            where += ": "
        super().__init__(where + message)


@dataclass(frozen=True)
class Condition:
    condition_id: str
    display_name: str
    system_category: str
    sex_applicability: str = "both"

    def applies_to(self, sex: str) -> bool:
        return self.sex_applicability == "both" or self.sex_applicability == f"{sex}_only"


@dataclass(frozen=True)
class ConditionCatalog:
    entries: tuple[Condition, ...]

    def __post_init__(self):
        if not self.entries:
            raise ValidationError("catalog is empty")
        seen = set()
        for e in self.entries:
            if not e.condition_id:
                raise ValidationError("empty condition_id")
            if e.condition_id in seen:
                raise ValidationError(f"duplicate condition_id {e.condition_id!r}")
            seen.add(e.condition_id)
            if not e.system_category:
                raise ValidationError(f"condition {e.condition_id!r} has no system_category")
            if e.sex_applicability not in SEX_APPLICABILITY:
                raise ValidationError(
                    f"condition {e.condition_id!r}: unknown sex_applicability {e.sex_applicability!r}"
                )
        object.__setattr__(self, "_by_id", {e.condition_id: e for e in self.entries})
        object.__setattr__(self, "_by_name", {e.display_name.casefold(): e.condition_id for e in self.entries})

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, condition_id: str) -> bool:
        return condition_id in self._by_id

    def __getitem__(self, condition_id: str) -> Condition:
        return self._by_id[condition_id]

    def resolve(self, token: str) -> str | None:
        """Condition id for an id or a display name (case-insensitive); None if unknown."""
        if token in self._by_id:
            return token
        return self._by_name.get(token.casefold())

    def ids(self) -> list[str]:
        return [e.condition_id for e in self.entries]

    def for_sex(self, sex: str) -> list[str]:
        """Sorted ids of conditions applicable to ``sex``."""
        return sorted(e.condition_id for e in self.entries if e.applies_to(sex))

    def name(self, condition_id: str) -> str:
        return self._by_id[condition_id].display_name

    def category(self, condition_id: str) -> str:
        return self._by_id[condition_id].system_category


@dataclass(frozen=True)
class Patient:
    patient_id: str
    sex: str
    ethnicity: str | None = None
    imd_quintile: int | None = None
    age: float | None = None  # attained age, only used by the demographics table


@dataclass(frozen=True)
class DiagnosisRecord:
    patient_id: str
    condition_id: str
    age_at_first_diagnosis: float


@dataclass(frozen=True)
class AgeBand:
    label: str
    lower_inclusive: float
    upper_exclusive: float = math.inf

    def contains(self, age: float) -> bool:
        return self.lower_inclusive <= age < self.upper_exclusive

    @property
    def slug(self) -> str:
        """Filesystem-safe band token (``under45``, ``45-64``, ``65plus``)."""
        lo, hi = self.lower_inclusive, self.upper_exclusive
        if lo == 0 and hi == math.inf:
            return "all"
        if lo == 0:
            return f"under{_num(hi)}"
        if hi == math.inf:
            return f"{_num(lo)}plus"
        return self.label.replace("<", "lt")


def _num(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else f"{x:g}"


ALL_AGES = AgeBand("all", 0.0, math.inf)


def make_bands(cuts: Sequence[float] = (45, 65)) -> list[AgeBand]:
    """Bands covering [0, inf) split at ``cuts``: (45, 65) -> <45, 45-64, 65+."""
    cuts = [float(c) for c in cuts]
    if any(c <= 0 or not math.isfinite(c) for c in cuts):
        raise ValidationError(f"band cut points must be positive and finite: {cuts}")
    if any(b <= a for a, b in zip(cuts, cuts[1:])):
        raise ValidationError(f"band cut points must be strictly increasing: {cuts}")
    edges = [0.0, *cuts, math.inf]
    bands = []
    for lo, hi in zip(edges, edges[1:]):
        if lo == 0 and hi == math.inf:
            label = "all"
        elif lo == 0:
            label = f"<{_num(hi)}"
        elif hi == math.inf:
            label = f"{_num(lo)}+"
        elif lo.is_integer() and hi.is_integer():
            label = f"{_num(lo)}-{_num(hi - 1)}"
        else:
            label = f"{_num(lo)}-<{_num(hi)}"
        bands.append(AgeBand(label, lo, hi))
    return bands


def find_band(bands: Iterable[AgeBand], token: str) -> AgeBand:
    """Look a band up by label (``<45``) or slug (``under45``)."""
    for b in bands:
        if token in (b.label, b.slug):
            return b
    raise ValidationError(f"unknown age band {token!r}")


@dataclass(frozen=True)
class Stratum:
    sex: str
    band: AgeBand
    members: tuple[str, ...]
    events: Mapping[str, Mapping[str, float]] = field(repr=False)

    @property
    def n(self) -> int:
        return len(self.members)

    @property
    def key(self) -> str:
        return f"{self.sex}_{self.band.slug}"


# --- file parsing ---------------------------------------------------------

def _dialect_for(path: Path) -> str:
    return "\t" if path.suffix.lower() in (".tsv", ".tab", ".txt") else ","


def _read_rows(path: str | Path, required: Sequence[str]) -> list[tuple[int, dict[str, str]]]:
    path = Path(path)
    if not path.is_file():
        raise ValidationError("file not found", path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh, delimiter=_dialect_for(path))
        header = [h.strip() for h in (reader.fieldnames or [])]
        missing = [c for c in required if c not in header]
        if not header:
            raise ValidationError("empty file", path)
        if missing:
            raise ValidationError(f"missing column(s) {', '.join(missing)}", path, 1)
        reader.fieldnames = header
        rows = []
        for i, raw in enumerate(reader, start=2):
            if None in raw:
                raise ValidationError("too many fields", path, i)
            rows.append((i, {k: (v or "").strip() for k, v in raw.items()}))
    return rows


def load_catalog(path: str | Path | None = None) -> ConditionCatalog:
    """Read a catalog CSV/TSV; ``None`` loads the packaged 40-condition list."""
    if path is None:
        ref = resources.files("mltcnet") / "data" / "conditions.csv"
        with resources.as_file(ref) as p:
            return load_catalog(p)
    rows = _read_rows(path, CATALOG_COLUMNS)
    if not rows:
        raise ValidationError("empty file", path)
    entries = []
    seen: set[str] = set()
    for i, r in rows:
        cid = r["condition_id"]
        if not cid:
            raise ValidationError("empty condition_id", path, i)
        if cid in seen:
            raise ValidationError(f"duplicate condition_id {cid!r}", path, i)
        seen.add(cid)
        sa = r["sex_applicability"] or "both"
        if sa not in SEX_APPLICABILITY:
            raise ValidationError(f"unknown sex_applicability {sa!r}", path, i)
        if not r["system_category"]:
            raise ValidationError(f"condition {cid!r} has no system_category", path, i)
        entries.append(Condition(cid, r["display_name"] or cid, r["system_category"], sa))
    catalog = ConditionCatalog(tuple(entries))
    for sex in SEXES:
        if not catalog.for_sex(sex):
            raise ValidationError(f"no condition applicable to {sex}", path)
    return catalog


def _parse_sex(value: str, path, row) -> str:
    v = value.lower()
    if v in ("m", "male"):
        return "male"
    if v in ("f", "female"):
        return "female"
    raise ValidationError(f"sex must be male or female, got {value!r}", path, row)


def load_patients(path: str | Path) -> list[Patient]:
    """Patients file: ``patient_id,sex`` plus optional ``ethnicity,imd_quintile,age``."""
    rows = _read_rows(path, ("patient_id", "sex"))
    patients = []
    seen: set[str] = set()
    for i, r in rows:
        pid = r["patient_id"]
        if not pid:
            raise ValidationError("empty patient_id", path, i)
        if pid in seen:
            raise ValidationError(f"duplicate patient_id {pid!r}", path, i)
        seen.add(pid)
        imd = r.get("imd_quintile") or None
        if imd is not None:
            try:
                imd = int(imd)
            except ValueError:
                raise ValidationError(f"imd_quintile not an integer: {imd!r}", path, i) from None
            if not 1 <= imd <= 5:
                raise ValidationError(f"imd_quintile out of range 1-5: {imd}", path, i)
        age = r.get("age") or None
        if age is not None:
            age = _parse_age(age, path, i)
        patients.append(
            Patient(pid, _parse_sex(r["sex"], path, i), r.get("ethnicity") or None, imd, age)
        )
    return patients


def _parse_age(value: str, path, row) -> float:
    try:
        age = float(value)
    except ValueError:
        raise ValidationError(f"age is not a number: {value!r}", path, row) from None
    if not math.isfinite(age) or age < 0 or age > MAX_AGE:
        raise ValidationError(f"age out of range [0, {MAX_AGE:g}]: {value}", path, row)
    return age


def load_cohort(
    path: str | Path,
    catalog: ConditionCatalog,
    patients_path: str | Path | None = None,
) -> tuple[list[Patient], list[DiagnosisRecord]]:
    """Read long-format first-diagnosis rows and validate them against ``catalog``.

    When ``patients_path`` is given, patients come from that file (so people
    without any listed diagnosis are kept) and every cohort row must agree
    with it on sex.
    """
    known: dict[str, Patient] = {}
    if patients_path is not None:
        known = {p.patient_id: p for p in load_patients(patients_path)}
    rows = _read_rows(path, COHORT_COLUMNS)
    sex_of: dict[str, str] = {pid: p.sex for pid, p in known.items()}
    seen: set[tuple[str, str]] = set()
    records = []
    for i, r in rows:
        pid, cid = r["patient_id"], catalog.resolve(r["condition_id"])
        if not pid:
            raise ValidationError("empty patient_id", path, i)
        sex = _parse_sex(r["sex"], path, i)
        if sex_of.setdefault(pid, sex) != sex:
            raise ValidationError(f"patient {pid!r} has conflicting sex values", path, i)
        if known and pid not in known:
            raise ValidationError(f"patient {pid!r} missing from patients file", path, i)
        if cid is None:
            raise ValidationError(f"unknown condition {r['condition_id']!r}", path, i)
        if not catalog[cid].applies_to(sex):
            raise ValidationError(
                f"condition {cid!r} is {catalog[cid].sex_applicability}, patient {pid!r} is {sex}",
                path,
                i,
            )
        if (pid, cid) in seen:
            raise ValidationError(f"duplicate record for ({pid!r}, {cid!r})", path, i)
        seen.add((pid, cid))
        records.append(DiagnosisRecord(pid, cid, _parse_age(r["age_at_first_diagnosis"], path, i)))
    if known:
        patients = sorted(known.values(), key=lambda p: p.patient_id)
    else:
        patients = [Patient(pid, sex) for pid, sex in sorted(sex_of.items())]
    records.sort(key=lambda d: (d.patient_id, d.condition_id))
    return patients, records


def stratify(
    patients: Sequence[Patient],
    records: Sequence[DiagnosisRecord],
    bands: Sequence[AgeBand] | None = None,
) -> list[Stratum]:
    """Split diagnoses into (sex, band) strata, sexes outer, bands inner.

    A patient belongs to every band that holds at least one of their first
    diagnoses, so membership overlaps across bands.
    """
    bands = list(bands) if bands is not None else make_bands()
    sex_of = {p.patient_id: p.sex for p in patients}
    buckets: dict[tuple[str, int], dict[str, dict[str, float]]] = defaultdict(dict)
    for rec in records:
        sex = sex_of[rec.patient_id]
        for k, band in enumerate(bands):
            if band.contains(rec.age_at_first_diagnosis):
                buckets[(sex, k)].setdefault(rec.patient_id, {})[rec.condition_id] = (
                    rec.age_at_first_diagnosis
                )
                break
    strata = []
    for sex in SEXES:
        for k, band in enumerate(bands):
            ev = buckets.get((sex, k), {})
            members = tuple(sorted(ev))
            events = {pid: dict(sorted(ev[pid].items())) for pid in members}
            strata.append(Stratum(sex, band, members, events))
    return strata


def sex_cohort(
    patients: Sequence[Patient], records: Sequence[DiagnosisRecord], sex: str
) -> Stratum:
    """All-ages view of one sex: every patient of that sex with a diagnosis."""
    (st,) = [s for s in stratify(patients, records, [ALL_AGES]) if s.sex == sex]
    return st
