"""Flat ``key = value`` run configuration.

Blank lines and ``#`` comments are ignored; keys may repeat where a value is
per stratum (``or_threshold = male:45-64=4.03``).  Command-line flags are
applied on top of the file, so flags win on conflict.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from .catalog import SEXES, AgeBand, ValidationError, find_band, make_bands
from .network import FORMATS


def parse_kv(text: str, source: str = "<config>") -> list[tuple[str, str]]:
    pairs = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split(" #", 1)[0].strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValidationError(f"expected 'key = value', got {raw.strip()!r}", source, lineno)
        key, value = line.split("=", 1)
        key = key.strip().lower().replace("-", "_")
        if not key:
            raise ValidationError("empty key", source, lineno)
        pairs.append((key, value.strip()))
    return pairs


def read_kv(path: str | Path) -> list[tuple[str, str]]:
    path = Path(path)
    if not path.is_file():
        raise ValidationError("config file not found", path)
    return parse_kv(path.read_text(encoding="utf-8"), str(path))


@dataclass(frozen=True)
class StratumValues:
    """A default plus ``sex:band`` overrides, e.g. ``4`` and ``male:45-64=4.03``."""

    default: float | None = None
    overrides: tuple[tuple[str, str, float], ...] = ()

    def add(self, spec: str) -> "StratumValues":
        spec = spec.strip()
        if "=" not in spec:
            return dataclasses.replace(self, default=_float(spec, "value"))
        target, value = spec.rsplit("=", 1)
        sex, sep, band = target.partition(":")
        sex = sex.strip().lower()
        if not sep or sex not in SEXES or not band.strip():
            raise ValidationError(f"expected sex:band=value, got {spec!r}")
        rest = tuple(o for o in self.overrides if (o[0], o[1]) != (sex, band.strip()))
        return dataclasses.replace(self, overrides=rest + ((sex, band.strip(), _float(value, spec)),))

    def get(self, sex: str, band: AgeBand, fallback: float | None = None) -> float | None:
        for s, b, v in self.overrides:
            if s == sex and b in (band.label, band.slug):
                return v
        return self.default if self.default is not None else fallback

    def check_bands(self, bands: Iterable[AgeBand]) -> None:
        bands = list(bands)
        for _, b, _ in self.overrides:
            find_band(bands, b)

    def render(self) -> list[str]:
        out = [] if self.default is None else [f"{self.default:g}"]
        return out + [f"{s}:{b}={v:g}" for s, b, v in self.overrides]


def _float(value: str, what: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise ValidationError(f"not a number in {what!r}: {value!r}") from None


def _int(value: str, what: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise ValidationError(f"{what} must be an integer, got {value!r}") from None


def _bool(value: str, what: str) -> bool:
    v = value.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValidationError(f"{what} must be true/false, got {value!r}")


def parse_cuts(value: str) -> tuple[float, ...]:
    value = value.strip()
    if not value:
        return ()
    return tuple(_float(x, "bands") for x in value.split(","))


@dataclass
class RunConfig:
    input: str | None = None
    patients: str | None = None
    catalog: str | None = None
    out: str = "out"
    bands: tuple[float, ...] = (45.0, 65.0)
    alpha: float = 0.05
    min_pair_freq: int = 100
    or_threshold: StratumValues = field(default_factory=lambda: StratumValues(1.0))
    table_min_pair_freq: StratumValues = field(default_factory=StratumValues)
    table_min_group_pct: StratumValues = field(default_factory=StratumValues)
    combo_min_size: int = 3
    combo_max_size: int | None = None
    combo_min_prevalence: StratumValues = field(default_factory=StratumValues)
    combo_min_or: float = 1.0
    combo_exact_counts: bool = False
    combo_cap: int = 10**6
    sensitivity_thresholds: tuple[float, ...] = tuple(float(x) for x in range(2, 16))
    heatmap_min_cramers_v: float = 0.1
    reference_prevalence: str | None = None
    formats: tuple[str, ...] = FORMATS
    fdr_scope: str = "per_stratum"
    workers: int = 1

    # keys that only affect how a run executes, never what it writes
    RUNTIME_KEYS = ("workers", "out")

    def apply(self, key: str, value: str) -> None:
        key = key.lower().replace("-", "_")
        if key in ("input", "patients", "catalog", "out", "reference_prevalence"):
            setattr(self, key, value or None)
        elif key == "bands":
            self.bands = parse_cuts(value)
        elif key in ("alpha", "heatmap_min_cramers_v", "combo_min_or"):
            setattr(self, key, _float(value, key))
        elif key in ("min_pair_freq", "combo_min_size", "combo_cap", "workers"):
            setattr(self, key, _int(value, key))
        elif key == "combo_max_size":
            self.combo_max_size = _int(value, key) if value else None
        elif key in ("or_threshold", "table_min_pair_freq", "table_min_group_pct", "combo_min_prevalence"):
            setattr(self, key, getattr(self, key).add(value))
        elif key == "combo_exact_counts":
            self.combo_exact_counts = _bool(value, key)
        elif key == "sensitivity_thresholds":
            self.sensitivity_thresholds = parse_cuts(value)
        elif key in ("format", "formats"):
            self.formats = tuple(x.strip() for x in value.split(",") if x.strip())
        elif key == "fdr_scope":
            self.fdr_scope = value.strip()
        else:
            raise ValidationError(f"unknown config key {key!r}")

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[str, str]]) -> "RunConfig":
        cfg = cls()
        for k, v in pairs:
            cfg.apply(k, v)
        return cfg

    def band_list(self) -> list[AgeBand]:
        return make_bands(self.bands)

    def validate(self) -> "RunConfig":
        if not 0 < self.alpha < 1:
            raise ValidationError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.min_pair_freq < 1:
            raise ValidationError("min_pair_freq must be >= 1")
        if self.combo_min_size < 2:
            raise ValidationError("combo_min_size must be >= 2")
        if self.combo_max_size is not None and self.combo_max_size < self.combo_min_size:
            raise ValidationError("combo_max_size must be >= combo_min_size")
        if self.fdr_scope not in ("per_stratum", "global"):
            raise ValidationError(f"fdr_scope must be per_stratum or global, got {self.fdr_scope!r}")
        bad = [f for f in self.formats if f not in FORMATS]
        if bad:
            raise ValidationError(f"unknown graph format(s) {', '.join(bad)}")
        if self.workers < 1:
            raise ValidationError("workers must be >= 1")
        if list(self.sensitivity_thresholds) != sorted(self.sensitivity_thresholds):
            raise ValidationError("sensitivity_thresholds must be ascending")
        bands = self.band_list()
        for sv in (self.or_threshold, self.table_min_pair_freq, self.table_min_group_pct, self.combo_min_prevalence):
            sv.check_bands(bands)
        return self

    def echo(self) -> dict:
        """Config as written to the run manifest (runtime-only keys dropped)."""
        out = {}
        for f in dataclasses.fields(self):
            if f.name in self.RUNTIME_KEYS:
                continue
            v = getattr(self, f.name)
            if isinstance(v, StratumValues):
                v = v.render()
            elif isinstance(v, tuple):
                v = list(v)
            out[f.name] = v
        return out


def flag_pairs(args: Mapping[str, object]) -> list[tuple[str, str]]:
    """Turn parsed CLI flags (``None`` = not given) into config pairs."""
    pairs = []
    for key, value in args.items():
        if value is None:
            continue
        if isinstance(value, (list, tuple)):
            pairs.extend((key, str(v)) for v in value)
        else:
            pairs.append((key, str(value)))
    return pairs
