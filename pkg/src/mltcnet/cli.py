"""``mltcnet`` command line.

Exit codes: 0 success, 1 runtime failure, 2 usage or validation error.  Errors
are printed as one line on stderr: ``mltcnet: error: <kind>: <message>``.
"""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Sequence

from . import __version__
from .catalog import ValidationError
from .combos import CombinationLimitError
from .config import RunConfig, flag_pairs, read_kv
from .network import FORMATS
from .pipeline import run, write_tree
from .synth import SynthSpec, write_cohort

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2

PARTS = {
    "analyze": {"tables", "graphs", "sensitivity", "cohort"},
    "sensitivity": {"sensitivity"},
    "report": {"tables", "cohort"},
}


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # keep the single-line contract for usage errors too
        self.print_usage(sys.stderr)
        _fail("usage", message)
        raise SystemExit(EXIT_USAGE)


def _fail(kind: str, message: str) -> None:
    print(f"mltcnet: error: {kind}: {' '.join(str(message).split())}", file=sys.stderr)


def _run_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("inputs")
    g.add_argument("--input", help="cohort CSV/TSV: patient_id,sex,condition_id,age_at_first_diagnosis")
    g.add_argument("--patients", help="optional patient table: patient_id,sex[,ethnicity,imd_quintile,age]")
    g.add_argument("--catalog", help="condition catalog (default: packaged 40-condition list)")
    g.add_argument("--config", help="key = value config file; flags override it")
    g = p.add_argument_group("analysis")
    g.add_argument("--out", help="output directory (default: out)")
    g.add_argument("--bands", help="age band cut points, e.g. 45,65")
    g.add_argument("--alpha", help="FDR significance level (default 0.05)")
    g.add_argument("--min-pair-freq", dest="min_pair_freq", help="minimum pair frequency (default 100)")
    g.add_argument("--or-threshold", dest="or_threshold", action="append", metavar="[SEX:BAND=]VALUE",
                   help="network OR threshold; repeatable, e.g. male:45-64=4.03")
    g.add_argument("--fdr-scope", dest="fdr_scope", choices=("per_stratum", "global"))
    g.add_argument("--format", dest="formats", help=f"graph formats, comma separated ({','.join(FORMATS)})")
    g.add_argument("--workers", type=int, help="parallel worker processes (output is identical for any value)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mltcnet", description="Sex- and age-stratified comorbidity progression networks.")
    parser.add_argument("--version", action="version", version=f"mltcnet {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "analyze": "full run: tables, combinations, graphs, sensitivity, summaries",
        "sensitivity": "OR-threshold sensitivity tables only",
        "report": "pair, association, combination and summary tables only",
    }
    for name, text in helps.items():
        _run_flags(sub.add_parser(name, help=text, description=text))
    s = sub.add_parser("synth", help="generate a seeded synthetic cohort", description="generate a seeded synthetic cohort")
    s.add_argument("--config", help="synth spec file (same key = value format)")
    s.add_argument("--catalog", help="condition catalog to draw from")
    s.add_argument("--out", help="output directory (default: synth)")
    s.add_argument("--seed", type=int, help="overrides the spec's seed")
    s.add_argument("--n-patients", dest="n_patients", type=int, help="patients per sex")
    return parser


def _run_config(args: argparse.Namespace) -> RunConfig:
    pairs = read_kv(args.config) if args.config else []
    flags = {k: getattr(args, k) for k in (
        "input", "patients", "catalog", "out", "bands", "alpha", "min_pair_freq",
        "or_threshold", "fdr_scope", "formats", "workers",
    )}
    return RunConfig.from_pairs(pairs + flag_pairs(flags)).validate()


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = _run_config(args)
    files = run(cfg, PARTS[args.command])
    write_tree(files, cfg.out)
    logging.getLogger("mltcnet").info("wrote %d files to %s", len(files), cfg.out)
    return EXIT_OK


def _cmd_synth(args: argparse.Namespace) -> int:
    spec = SynthSpec.from_file(args.config) if args.config else SynthSpec()
    if args.seed is not None:
        spec.seed = args.seed
    if args.n_patients is not None:
        spec.n_patients = args.n_patients
    if args.catalog is not None:
        spec.catalog = args.catalog
    written = write_cohort(spec, args.out or "synth")
    for path in written.values():
        print(path)
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "synth":
            return _cmd_synth(args)
        return _cmd_run(args)
    except ValidationError as e:
        _fail("validation", str(e))
        return EXIT_USAGE
    except FileNotFoundError as e:
        _fail("validation", f"{e.filename}: file not found")
        return EXIT_USAGE
    except CombinationLimitError as e:
        _fail("runtime", str(e))
        return EXIT_RUNTIME
    except (OSError, RuntimeError, ValueError, ArithmeticError) as e:
        _fail("runtime", f"{type(e).__name__}: {e}")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
