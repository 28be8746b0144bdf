"""Shared helpers for the experiment scripts."""

from __future__ import annotations

import argparse
import time
from pathlib import Path

from gpsmatch.harness import PREMATCHED, parse_manifest, run_simulation
from gpsmatch.matching import ALGORITHMS

HERE = Path(__file__).resolve().parent


def run_manifest(default_manifest: str, description: str, metric: str = "median_maxmax2sb") -> None:
    ap = argparse.ArgumentParser(description=description)
    ap.add_argument("--manifest", type=Path, default=HERE / "manifests" / default_manifest)
    ap.add_argument("--replications", type=int)
    ap.add_argument("--workers", type=int)
    ap.add_argument("--out", type=Path, default=Path("results") / Path(default_manifest).stem)
    args = ap.parse_args()
    text = args.manifest.read_text()
    if args.replications:
        text += f"\nreplications={args.replications}"
    if args.workers:
        text += f"\nworkers={args.workers}"
    man = parse_manifest(text)
    t0 = time.perf_counter()
    res = run_simulation(man, args.out)
    print(f"{len(man.configs)} configuration(s) x {man.replications} replications "
          f"in {time.perf_counter() - t0:.0f}s; CSVs in {args.out}")
    print_pivot(res.summary, metric)
    print_pivot(res.summary, "median_prop_matched")


def print_pivot(summary: list[dict[str, str]], metric: str) -> None:
    """Rows: (z, p, b); columns: algorithms."""
    algs = [PREMATCHED, *ALGORITHMS]
    cells = {(s["z"], s["p"], s["b"], s["algorithm"]): s[metric] for s in summary}
    keys = sorted({k[:3] for k in cells}, key=lambda k: (int(k[0]), int(k[1]), float(k[2])))
    print(f"\n{metric}")
    print(f"{'z':>2} {'p':>3} {'b':>5} " + " ".join(f"{a:>6}" for a in algs))
    for z, p, b in keys:
        vals = [cells.get((z, p, b, a), "") for a in algs]
        print(f"{z:>2} {p:>3} {float(b):>5.2f} " + " ".join(f"{float(v):6.3f}" if v else f"{'':>6}" for v in vals))
