"""Monte-Carlo runner: (configuration x replication) jobs, raw records, medians.

Every job is a pure function of ``(manifest seed, config index, replication)``,
so results do not depend on the worker count or completion order.
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from statistics import median
from typing import Iterable, Sequence

import numpy as np

from .balance import balance_report, reference_scale
from .gps import trim_and_refit
from .matching import (
    ALGORITHMS,
    DEFAULT_CLUSTERS,
    DEFAULT_EPSILON,
    DEFAULT_FUZZY_M,
    get_algorithm,
    run_algorithm,
)
from .simgen import FACTORS, SimConfig, SimulationError, cross, enumerate_grid, sample_cohort

log = logging.getLogger(__name__)

RAW_COLUMNS = ("z", "n1", "gamma", "b", "lambda", "s2", "s3", "eta", "df", "p",
               "algorithm", "replication", "status", "maxmax2sb", "meanmax2sb", "prop_matched")
SUMMARY_COLUMNS = ("z", "p", "b", "algorithm", "median_maxmax2sb", "median_meanmax2sb",
                   "median_prop_matched", "n_ok", "n_failed")
PREMATCHED = "pre"
_RAW_KEYS = dict(zip(FACTORS, ("z", "n1", "gamma", "b", "lambda", "s2", "s3", "eta", "df", "p")))

# manifest keys that name simulation factors
_FACTOR_KEYS = {
    "z": "Z", "n1": "n1", "gamma": "gamma", "b": "b", "lambda": "lam", "lam": "lam",
    "s2": "sigma2_sq", "sigma2_sq": "sigma2_sq", "s3": "sigma3_sq", "sigma3_sq": "sigma3_sq",
    "eta": "eta", "df": "df", "p": "P",
}


class ManifestError(ValueError):
    pass


@dataclass(frozen=True)
class RunManifest:
    configs: tuple[SimConfig, ...]
    algorithms: tuple[str, ...] = tuple(ALGORITHMS)
    replications: int = 20
    seed: int = 0
    K: int = DEFAULT_CLUSTERS
    m: float = DEFAULT_FUZZY_M
    epsilon: float = DEFAULT_EPSILON
    reference: int = 1
    include_prematched: bool = True
    workers: int = 1
    out: Path | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.replications < 1:
            raise ManifestError("replications must be at least 1")
        for a in self.algorithms:
            if a not in ALGORITHMS:
                raise ManifestError(f"unknown algorithm {a!r}")
        if not self.configs:
            raise ManifestError("manifest selects no configurations")
        if self.K < 1 or not self.m > 1 or self.epsilon < 0:
            raise ManifestError("need clusters >= 1, fuzzy_m > 1, epsilon >= 0")


def _number(s: str) -> float:
    v = float(s)
    return int(v) if v.is_integer() else v


def parse_manifest(text: str) -> RunManifest:
    """Parse a flat ``key=value`` manifest.

    ``grid`` is ``z35``, ``z10`` or ``custom`` (default). For ``custom`` every
    factor key may list comma-separated levels; unspecified factors take the
    desk-scale defaults. Levels are crossed without the design-grid exclusions.
    """
    kv: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ManifestError(f"line {lineno}: expected key=value")
        k, v = (s.strip() for s in line.split("=", 1))
        kv[k.lower()] = v

    grid = kv.pop("grid", "custom").lower()
    mean_pattern = kv.pop("mean_pattern", "recycle")
    factor_levels: dict[str, tuple] = {}
    for key in list(kv):
        if key in _FACTOR_KEYS:
            factor_levels[_FACTOR_KEYS[key]] = tuple(_number(x) for x in kv.pop(key).split(","))
    if grid in ("z35", "z10"):
        configs = tuple(c for c in enumerate_grid(grid)
                        if all(getattr(c, f) in lv for f, lv in factor_levels.items()))
    elif grid == "custom":
        default = SimConfig()
        levels = {f: factor_levels.get(f, (getattr(default, f),)) for f in FACTORS}
        try:
            configs = cross(levels, exclude=False, mean_pattern=mean_pattern).configs
        except SimulationError as exc:
            raise ManifestError(str(exc)) from None
    else:
        raise ManifestError(f"unknown grid {grid!r}")

    opts: dict = {}
    try:
        if "algorithms" in kv:
            opts["algorithms"] = tuple(a.strip() for a in kv.pop("algorithms").split(",") if a.strip())
        for key, name, conv in [
            ("replications", "replications", int), ("seed", "seed", int),
            ("clusters", "K", int), ("k", "K", int), ("fuzzy_m", "m", float), ("m", "m", float),
            ("epsilon", "epsilon", float), ("reference", "reference", int),
            ("workers", "workers", int),
        ]:
            if key in kv:
                opts[name] = conv(kv.pop(key))
        if "include_prematched" in kv:
            opts["include_prematched"] = kv.pop("include_prematched").lower() in ("1", "true", "yes")
        if "out" in kv:
            opts["out"] = Path(kv.pop("out"))
    except ValueError as exc:
        raise ManifestError(str(exc)) from None
    if kv:
        raise ManifestError(f"unknown manifest key(s): {', '.join(sorted(kv))}")
    return RunManifest(configs=configs, **opts)


def _fmt(v) -> str:
    if isinstance(v, float):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(v)


def _config_columns(cfg: SimConfig) -> dict[str, str]:
    return {_RAW_KEYS[f]: _fmt(getattr(cfg, f)) for f in FACTORS}


@dataclass(frozen=True)
class _Job:
    index: int
    cfg: SimConfig
    replication: int
    manifest: RunManifest


def run_job(job: _Job) -> list[dict[str, str]]:
    """One replication of one configuration across all requested algorithms."""
    man = job.manifest
    base = _config_columns(job.cfg)
    labels = ([PREMATCHED] if man.include_prematched else []) + list(man.algorithms)

    def row(alg, status, rep=None):
        r = dict(base, algorithm=alg, replication=str(job.replication), status=status)
        if rep is None:
            r.update(maxmax2sb="nan", meanmax2sb="nan", prop_matched="nan")
        else:
            r.update(maxmax2sb=_fmt(rep.maxmax2sb), meanmax2sb=_fmt(rep.meanmax2sb),
                     prop_matched=_fmt(rep.prop_matched))
        return r

    entropy = [man.seed, job.index, job.replication]
    try:
        full = sample_cohort(job.cfg, entropy)
        tr = trim_and_refit(full)
        delta = reference_scale(full, man.reference)
    except Exception as exc:  # noqa: BLE001 - recorded as a row status
        return [row(a, f"error: {exc}") for a in labels]

    match_seed = int(np.random.SeedSequence(entropy).generate_state(1)[0])
    rows = []
    cache: dict = {}
    for alg in labels:
        try:
            if alg == PREMATCHED:
                rep = balance_report(tr.cohort, None, delta)
                rows.append(row(alg, "ok", rep))
                continue
            ms = run_algorithm(tr.cohort, tr.gps, get_algorithm(alg), man.reference,
                               K=man.K, m=man.m, epsilon=man.epsilon, seed=match_seed, cache=cache)
            if ms.empty:
                rows.append(row(alg, "empty"))
                continue
            rows.append(row(alg, "ok", balance_report(tr.cohort, ms, delta)))
        except Exception as exc:  # noqa: BLE001
            rows.append(row(alg, f"error: {exc}"))
    return rows


def jobs(man: RunManifest) -> list[_Job]:
    return [_Job(i, cfg, r, man) for i, cfg in enumerate(man.configs) for r in range(man.replications)]


def run_raw(man: RunManifest) -> list[dict[str, str]]:
    js = jobs(man)
    if man.workers > 1:
        with ProcessPoolExecutor(max_workers=man.workers) as ex:
            parts = list(ex.map(run_job, js, chunksize=max(1, len(js) // (4 * man.workers))))
    else:
        parts = [run_job(j) for j in js]
    return [r for part in parts for r in part]


def summarize(raw: Iterable[dict[str, str]], algorithm_order: Sequence[str] | None = None) -> list[dict[str, str]]:
    """Median metrics per ``(z, p, b, algorithm)`` cell over all other factors and replications."""
    cells: dict[tuple, dict] = {}
    for r in raw:
        key = (int(r["z"]), int(float(r["p"])), float(r["b"]), r["algorithm"])
        cell = cells.setdefault(key, {"mm": [], "mean": [], "pm": [], "failed": 0})
        if r["status"] == "ok":
            cell["mm"].append(float(r["maxmax2sb"]))
            cell["mean"].append(float(r["meanmax2sb"]))
            cell["pm"].append(float(r["prop_matched"]))
        else:
            cell["failed"] += 1
    order = {a: i for i, a in enumerate(algorithm_order or [PREMATCHED, *ALGORITHMS])}
    out = []
    for key in sorted(cells, key=lambda k: (k[0], k[1], k[2], order.get(k[3], len(order)), k[3])):
        z, p, b, alg = key
        cell = cells[key]

        def med(xs):
            return _fmt(float(median(xs))) if xs else "nan"

        out.append({
            "z": str(z), "p": str(p), "b": _fmt(float(b)), "algorithm": alg,
            "median_maxmax2sb": med(cell["mm"]),
            "median_meanmax2sb": med(cell["mean"]),
            "median_prop_matched": med([x for x in cell["pm"] if not math.isnan(x)]),
            "n_ok": str(len(cell["mm"])),
            "n_failed": str(cell["failed"]),
        })
    return out


def summary_long(summary: Iterable[dict[str, str]]) -> list[dict[str, str]]:
    out = []
    for s in summary:
        for metric in ("maxmax2sb", "meanmax2sb", "prop_matched"):
            out.append({"z": s["z"], "p": s["p"], "b": s["b"], "algorithm": s["algorithm"],
                        "metric": metric, "value": s[f"median_{metric}"]})
    return out


def write_rows(rows: Iterable[dict[str, str]], columns: Sequence[str], path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(columns), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)


def read_rows(path: str | Path) -> list[dict[str, str]]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


@dataclass
class SimulationResult:
    raw: list[dict[str, str]]
    summary: list[dict[str, str]]
    paths: dict[str, Path] = field(default_factory=dict)

    def cell(self, algorithm: str, **where) -> dict[str, str]:
        """The unique summary row for ``algorithm`` matching ``where`` (z, p, b)."""
        hits = [s for s in self.summary if s["algorithm"] == algorithm
                and all(float(s[k]) == float(v) for k, v in where.items())]
        if len(hits) != 1:
            raise KeyError(f"{len(hits)} summary rows match {algorithm} {where}")
        return hits[0]


def run_simulation(man: RunManifest, out: str | Path | None = None) -> SimulationResult:
    """Run every job, then write ``raw.csv``, ``summary.csv`` and ``summary_long.csv``
    when an output directory is given (argument or manifest)."""
    out = Path(out) if out is not None else man.out
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_test"
        try:
            probe.write_text("")
            probe.unlink()
        except OSError as exc:
            raise OSError(f"output directory {out} is not writable: {exc}") from None
    raw = run_raw(man)
    order = ([PREMATCHED] if man.include_prematched else []) + list(man.algorithms)
    summary = summarize(raw, order)
    res = SimulationResult(raw, summary)
    if out is not None:
        res.paths = {"raw": out / "raw.csv", "summary": out / "summary.csv",
                     "summary_long": out / "summary_long.csv"}
        write_rows(raw, RAW_COLUMNS, res.paths["raw"])
        write_rows(summary, SUMMARY_COLUMNS, res.paths["summary"])
        write_rows(summary_long(summary), ("z", "p", "b", "algorithm", "metric", "value"),
                   res.paths["summary_long"])
    n_bad = sum(r["status"] != "ok" for r in raw)
    if n_bad:
        log.warning("%d of %d rows did not complete (see status column)", n_bad, len(raw))
    return res


