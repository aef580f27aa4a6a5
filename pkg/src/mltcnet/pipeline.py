"""End-to-end run: ingest, analyse every stratum, render every output file.

Work fans out over strata; outputs are assembled into a ``{relative path:
text}`` mapping and written in sorted order, so the tree is byte-identical for
any worker count.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

from . import __version__
from .assoc import PairAssociation, StratumMatrix, adjust, analyze_stratum, filter_significant
from .catalog import (
    SEXES, ConditionCatalog, DiagnosisRecord, Patient, Stratum, ValidationError,
    load_catalog, load_cohort, sex_cohort, stratify,
)
from .combos import enumerate_combinations, pair_graph, with_exact_counts
from .config import RunConfig
from .network import build_progression_graph, export_graph
from .report import (
    condition_summary, demographics_table, emit_association_table, emit_combination_table,
    emit_condition_summary, emit_heatmap_matrix, emit_pair_table, prevalence_comparison,
)
from .sensitivity import sweep, to_tsv

log = logging.getLogger(__name__)

ALL_PARTS = frozenset({"tables", "graphs", "sensitivity", "cohort"})


@dataclass
class Cohort:
    catalog: ConditionCatalog
    patients: list[Patient]
    records: list[DiagnosisRecord]


def load_inputs(cfg: RunConfig) -> Cohort:
    if not cfg.input:
        raise ValidationError("no cohort input given (--input)")
    catalog = load_catalog(cfg.catalog)
    patients, records = load_cohort(cfg.input, catalog, cfg.patients)
    return Cohort(catalog, patients, records)


def _map(fn: Callable, items: Sequence, workers: int) -> list:
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as ex:
        return list(ex.map(fn, items))


def _analyze_job(job: tuple[Stratum, ConditionCatalog]) -> list[PairAssociation]:
    stratum, catalog = job
    return analyze_stratum(stratum, catalog, fdr=False)


def _apply_fdr(groups: list[list[PairAssociation]], scope: str) -> list[list[PairAssociation]]:
    if scope == "per_stratum":
        return [adjust(g) for g in groups]
    flat = adjust([r for g in groups for r in g])
    out, i = [], 0
    for g in groups:
        out.append(flat[i:i + len(g)])
        i += len(g)
    return out


def _stratum_files(job) -> dict[str, str]:
    stratum, assocs, catalog, cfg, parts = job
    sex, band = stratum.sex, stratum.band
    key = stratum.key
    names = {e.condition_id: e.display_name for e in catalog.entries}
    files: dict[str, str] = {}

    def put(table: str, ext: str, text: str) -> None:
        files[f"{key}/{key}_{table}.{ext}"] = text

    matrix = StratumMatrix(stratum, catalog.for_sex(sex))
    if "tables" in parts:
        put("associations", "tsv", emit_association_table(assocs))
        put("pairs", "tsv", emit_pair_table(
            assocs, names, alpha=cfg.alpha,
            min_pair_freq=int(cfg.table_min_pair_freq.get(sex, band, cfg.min_pair_freq)),
            min_group_pct=cfg.table_min_group_pct.get(sex, band, 0.0),
        ))
        filtered = filter_significant(assocs, cfg.alpha, cfg.min_pair_freq, cfg.combo_min_or)
        combos = enumerate_combinations(
            pair_graph(filtered), cfg.combo_min_size, cfg.combo_max_size, n=stratum.n, cap=cfg.combo_cap,
        )
        if cfg.combo_exact_counts:
            combos = with_exact_counts(combos, matrix)
        put("combinations", "tsv", emit_combination_table(
            combos, names,
            min_prevalence_pct=cfg.combo_min_prevalence.get(sex, band, 0.0),
            exact=cfg.combo_exact_counts,
        ))
    if "graphs" in parts:
        graph = build_progression_graph(
            assocs, sex=sex, band=band.label, n=stratum.n, alpha=cfg.alpha,
            min_pair_freq=cfg.min_pair_freq, or_threshold=cfg.or_threshold.get(sex, band, 0.0),
            names=names,
        )
        for fmt in cfg.formats:
            put("network", fmt, export_graph(graph, fmt))
    if "sensitivity" in parts:
        rows = sweep(
            assocs, matrix, catalog, cfg.sensitivity_thresholds,
            alpha=cfg.alpha, min_pair_freq=cfg.min_pair_freq,
        )
        put("sensitivity", "tsv", to_tsv(rows))
    return files


def _read_reference(path: str) -> dict[str, float]:
    p = Path(path)
    if not p.is_file():
        raise ValidationError("reference prevalence file not found", p)
    delim = "\t" if p.suffix.lower() in (".tsv", ".txt") else ","
    with p.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh, delimiter=delim)
        if not reader.fieldnames or not {"condition_id", "population_pct"} <= set(reader.fieldnames):
            raise ValidationError("expected columns condition_id,population_pct", p, 1)
        return {r["condition_id"]: float(r["population_pct"]) for r in reader}


def _cohort_files(cohort: Cohort, sex_assocs: dict[str, list[PairAssociation]], cfg: RunConfig) -> dict[str, str]:
    catalog = cohort.catalog
    names = {e.condition_id: e.display_name for e in catalog.entries}
    files = {"demographics.tsv": demographics_table(cohort.patients)}
    summaries = {}
    for sex in SEXES:
        conds = catalog.for_sex(sex)
        counts, pvals = emit_heatmap_matrix(
            sex_assocs[sex], conds, names, alpha=cfg.alpha, min_cramers_v=cfg.heatmap_min_cramers_v,
        )
        files[f"{sex}_all_heatmap_counts.tsv"] = counts
        files[f"{sex}_all_heatmap_padj.tsv"] = pvals
        files[f"{sex}_all_associations.tsv"] = emit_association_table(sex_assocs[sex])
        files[f"{sex}_all_pairs.tsv"] = emit_pair_table(
            sex_assocs[sex], names, alpha=cfg.alpha, min_pair_freq=cfg.min_pair_freq,
        )
        summaries[sex] = condition_summary(cohort.patients, cohort.records, sex, conds)
        files[f"{sex}_all_condition_summary.tsv"] = emit_condition_summary(summaries[sex], names)
    n = {s: sum(1 for p in cohort.patients if p.sex == s) for s in SEXES}
    reference = _read_reference(cfg.reference_prevalence) if cfg.reference_prevalence else None
    if n["male"] + n["female"] > 0:
        files["prevalence_comparison.tsv"] = prevalence_comparison(
            summaries["male"], summaries["female"], n["male"], n["female"], names, reference,
        )
    return files


def run(cfg: RunConfig, parts: Iterable[str] = ALL_PARTS, cohort: Cohort | None = None) -> dict[str, str]:
    """Compute every output file in memory; keys are paths relative to the output dir."""
    cfg.validate()
    parts = frozenset(parts)
    cohort = cohort or load_inputs(cfg)
    catalog = cohort.catalog
    strata = stratify(cohort.patients, cohort.records, cfg.band_list())
    sex_views = [sex_cohort(cohort.patients, cohort.records, s) for s in SEXES]
    log.info("analysing %d strata with %d worker(s)", len(strata), cfg.workers)

    raw = _map(_analyze_job, [(s, catalog) for s in strata + sex_views], cfg.workers)
    strata_raw, sex_raw = raw[: len(strata)], raw[len(strata):]
    strata_assocs = _apply_fdr(strata_raw, cfg.fdr_scope)
    sex_assocs = {s: adjust(g) for s, g in zip(SEXES, sex_raw)}

    jobs = [(s, a, catalog, cfg, parts) for s, a in zip(strata, strata_assocs)]
    files: dict[str, str] = {}
    for chunk in _map(_stratum_files, jobs, cfg.workers):
        files.update(chunk)
    if "cohort" in parts:
        files.update(_cohort_files(cohort, sex_assocs, cfg))
    files["manifest.json"] = manifest(cfg, files)
    return files


def sha256(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def manifest(cfg: RunConfig, files: dict[str, str]) -> str:
    inputs = {}
    for label, path in (("input", cfg.input), ("patients", cfg.patients), ("catalog", cfg.catalog)):
        if path:
            inputs[label] = hashlib.sha256(Path(path).read_bytes()).hexdigest()
    doc = {
        "tool": "mltcnet",
        "version": __version__,
        "config": cfg.echo(),
        "inputs_sha256": inputs,
        "outputs_sha256": {k: sha256(v) for k, v in sorted(files.items())},
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def write_tree(files: dict[str, str], out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    written = []
    for rel in sorted(files):
        path = out / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(files[rel], encoding="utf-8", newline="")
        written.append(path)
    return written
