"""Command-line entry point: ``gpsmatch {match,balance,simulate,grid}``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from . import __version__
from .balance import balance_report, reference_scale, write_balance
from .data import CsvSchema, load_cohort
from .estimation import estimate_att, write_estimates
from .gps import trim_and_refit, write_coefficients, write_eligibility
from .harness import ManifestError, parse_manifest, run_simulation
from .matching import ALGORITHMS, default_reference, export_matched, import_matched, run_algorithm
from .simgen import FACTORS, enumerate_grid

log = logging.getLogger("gpsmatch")


def _positive_int(s: str) -> int:
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {s}")
    return v


def _cohort_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("cohort", type=Path, help="cohort CSV (id,treatment,x1..xP[,y])")
    p.add_argument("--treatment-col", default="treatment")
    p.add_argument("--id-col", default="id")
    p.add_argument("--outcome-col", default="y")
    p.add_argument("--covariates", help="comma-separated covariate columns (default: all others)")
    p.add_argument("--reference", default="auto",
                   help="reference treatment label, or 'auto' for the largest group")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gpsmatch", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    m = sub.add_parser("match", help="match a cohort and write matched/balance/estimate CSVs")
    _cohort_args(m)
    m.add_argument("--algorithm", choices=list(ALGORITHMS), default="GPSnc")
    m.add_argument("--epsilon", type=float, default=0.5)
    m.add_argument("--clusters", type=_positive_int, default=5, metavar="K")
    m.add_argument("--fuzzy-m", type=float, default=2.0)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--out", type=Path, default=Path("."))
    m.add_argument("--dump-gps", action="store_true",
                   help="also write GPS coefficients and the eligibility mask")

    b = sub.add_parser("balance", help="balance report for a cohort or a matched set")
    _cohort_args(b)
    b.add_argument("--matched", type=Path, help="matched CSV written by 'match'")
    b.add_argument("--no-trim", action="store_true",
                   help="pre-matched report on all units instead of the common-support cohort")
    b.add_argument("--out", type=Path, default=Path("balance.csv"))

    s = sub.add_parser("simulate", help="run a Monte-Carlo manifest")
    s.add_argument("manifest", type=Path, help="key=value manifest file")
    s.add_argument("--algorithm", action="append", choices=list(ALGORITHMS),
                   help="restrict to these algorithms (repeatable)")
    s.add_argument("--replications", type=_positive_int)
    s.add_argument("--seed", type=int)
    s.add_argument("--epsilon", type=float)
    s.add_argument("--clusters", type=_positive_int, metavar="K")
    s.add_argument("--fuzzy-m", type=float)
    s.add_argument("--workers", type=_positive_int)
    s.add_argument("--out", type=Path)

    g = sub.add_parser("grid", help="enumerate the simulation design")
    g.add_argument("--which", choices=["z35", "z10"], default="z35")
    g.add_argument("--count", action="store_true", help="print only the number of configurations")
    return parser


def _schema(args) -> CsvSchema:
    cov = [c.strip() for c in args.covariates.split(",")] if args.covariates else None
    return CsvSchema(treatment=args.treatment_col, id=args.id_col, outcome=args.outcome_col, covariates=cov)


def _reference(args, cohort) -> int:
    return default_reference(cohort) if args.reference == "auto" else cohort.code_of(args.reference)


def cmd_match(args) -> int:
    full = load_cohort(args.cohort, _schema(args))
    t = _reference(args, full)
    tr = trim_and_refit(full)
    ms = run_algorithm(tr.cohort, tr.gps, args.algorithm, t, K=args.clusters, m=args.fuzzy_m,
                       epsilon=args.epsilon, seed=args.seed)
    out: Path = args.out
    out.mkdir(parents=True, exist_ok=True)
    export_matched(ms, tr.cohort, out / "matched.csv", seed=args.seed, clusters=args.clusters,
                   fuzzy_m=args.fuzzy_m, epsilon=args.epsilon)
    for w in ms.warnings:
        log.warning(w)
    if args.dump_gps:
        write_coefficients(tr.model, out / "gps_coefficients.csv", full.labels, full.covariate_names)
        write_eligibility(tr.mask, full.ids, out / "eligibility.csv")
    if ms.empty:
        print(f"{args.algorithm}: empty matched set; no balance or estimates written", file=sys.stderr)
        return 1
    write_balance(balance_report(tr.cohort, ms, reference_scale(full, t)), out / "balance.csv")
    if full.outcomes is not None:
        write_estimates(estimate_att(tr.cohort, ms), out / "estimates.csv")
    print(f"{args.algorithm}: retained {len(ms.retained_refs)}/{ms.eligible_ref_count} "
          f"reference units; outputs in {out}")
    return 0


def cmd_balance(args) -> int:
    full = load_cohort(args.cohort, _schema(args))
    if args.matched:
        ms = import_matched(args.matched, full)
        t = ms.reference
        rep = balance_report(full, ms, reference_scale(full, t))
    else:
        t = _reference(args, full)
        c = full if args.no_trim else trim_and_refit(full).cohort
        rep = balance_report(c, None, reference_scale(full, t))
    write_balance(rep, args.out)
    print(f"maxmax2sb={rep.maxmax2sb:.4f} meanmax2sb={rep.meanmax2sb:.4f}")
    return 0


def cmd_simulate(args, parser) -> int:
    try:
        text = args.manifest.read_text(encoding="utf-8")
    except OSError as exc:
        print(f"error: cannot read manifest: {exc}", file=sys.stderr)
        return 1
    overrides = []
    if args.replications is not None:
        overrides.append(f"replications={args.replications}")
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    if args.epsilon is not None:
        overrides.append(f"epsilon={args.epsilon}")
    if args.clusters is not None:
        overrides.append(f"clusters={args.clusters}")
    if args.fuzzy_m is not None:
        overrides.append(f"fuzzy_m={args.fuzzy_m}")
    if args.workers is not None:
        overrides.append(f"workers={args.workers}")
    if args.algorithm:
        overrides.append("algorithms=" + ",".join(args.algorithm))
    try:
        man = parse_manifest(text + "\n" + "\n".join(overrides))
    except ManifestError as exc:
        parser.error(f"invalid manifest: {exc}")
    out = args.out or man.out or Path("sim_out")
    res = run_simulation(man, out)
    print(f"{len(res.raw)} raw rows, {len(res.summary)} summary rows written to {out}")
    return 0


def cmd_grid(args) -> int:
    grid = enumerate_grid(args.which)
    if args.count:
        print(len(grid))
        return 0
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["index", *FACTORS])
    for i, cfg in enumerate(grid):
        w.writerow([i, *cfg.key()])
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "match":
            return cmd_match(args)
        if args.command == "balance":
            return cmd_balance(args)
        if args.command == "simulate":
            return cmd_simulate(args, parser)
        return cmd_grid(args)
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
