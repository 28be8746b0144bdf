"""Multi-treatment matching on the (logit) generalized propensity score.

For a reference treatment ``t`` every other treatment ``t'`` is matched to the
``t`` units separately, possibly within k-means or fuzzy strata built on the
logit-GPS components other than ``t`` and ``t'``. Reference units matched in
every pair form the final cohort; their matches carry multiplicity weights
``psi``.

Conventions: unit indices are 0-based rows of the (eligible) cohort, treatment
codes are 1-based, ties are always broken by the lower unit index.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .clustering import fuzzy_cmeans, hard_sets, kmeans, threshold_assign
from .data import Cohort
from .distance import DistanceSpec, Metric, estimate_covariance, pairwise_distances
from .gps import logit_gps

log = logging.getLogger(__name__)

DEFAULT_EPSILON = 0.5
DEFAULT_CLUSTERS = 5
DEFAULT_FUZZY_M = 2.0


class Distance(str, Enum):
    LINEAR_GPS = "linear GPS"
    MAHALANOBIS_PAIR = "Mahalanobis logit(r(t), r(t'))"
    MAHALANOBIS_GPS = "Mahalanobis logit GPS vector"
    MAHALANOBIS_COV = "Mahalanobis covariates"


class Clustering(str, Enum):
    KMEANS = "k-means"
    FUZZY = "fuzzy"
    NONE = "NA"


@dataclass(frozen=True)
class AlgorithmSpec:
    label: str
    distance: Distance
    caliper: bool
    clustering: Clustering
    ratio: int = 1
    replacement: bool = True


ALGORITHMS: dict[str, AlgorithmSpec] = {
    a.label: a
    for a in [
        AlgorithmSpec("VM", Distance.LINEAR_GPS, True, Clustering.KMEANS),
        AlgorithmSpec("VM2", Distance.LINEAR_GPS, True, Clustering.KMEANS, ratio=2),
        AlgorithmSpec("VMnc", Distance.LINEAR_GPS, False, Clustering.KMEANS),
        AlgorithmSpec("VMnr", Distance.LINEAR_GPS, True, Clustering.KMEANS, replacement=False),
        AlgorithmSpec("VMF", Distance.LINEAR_GPS, True, Clustering.FUZZY),
        AlgorithmSpec("KM", Distance.MAHALANOBIS_PAIR, True, Clustering.KMEANS),
        AlgorithmSpec("KMnc", Distance.MAHALANOBIS_PAIR, False, Clustering.KMEANS),
        AlgorithmSpec("FM", Distance.MAHALANOBIS_PAIR, True, Clustering.FUZZY),
        AlgorithmSpec("FMnc", Distance.MAHALANOBIS_PAIR, False, Clustering.FUZZY),
        AlgorithmSpec("GPS", Distance.MAHALANOBIS_GPS, True, Clustering.NONE),
        AlgorithmSpec("GPSnc", Distance.MAHALANOBIS_GPS, False, Clustering.NONE),
        AlgorithmSpec("COVnc", Distance.MAHALANOBIS_COV, False, Clustering.NONE),
    ]
}


def get_algorithm(label: str) -> AlgorithmSpec:
    try:
        return ALGORITHMS[label]
    except KeyError:
        raise ValueError(f"unknown algorithm {label!r}; choose from {', '.join(ALGORITHMS)}") from None


@dataclass(frozen=True, eq=False)
class PairMatching:
    """Links from reference units to candidates for one treatment pair.

    Links are stored ref-major in rank order; only refs that received a full
    complement of ``ratio`` links appear.
    """

    link_ref: np.ndarray
    link_cand: np.ndarray
    link_dist: np.ndarray
    matched_refs: np.ndarray
    ratio: int = 1

    @property
    def n_links(self) -> int:
        return self.link_ref.shape[0]


@dataclass(frozen=True, eq=False)
class MatchedSet:
    reference: int
    retained_refs: np.ndarray
    psi: np.ndarray
    n_wm: np.ndarray
    eligible_ref_count: int
    algorithm: str = ""
    pairs: dict[int, PairMatching] = field(default_factory=dict, repr=False)
    warnings: tuple[str, ...] = ()

    @property
    def prop_matched(self) -> float:
        return len(self.retained_refs) / self.eligible_ref_count if self.eligible_ref_count else float("nan")

    @property
    def empty(self) -> bool:
        return len(self.retained_refs) == 0


def caliper_width(values, epsilon: float = DEFAULT_EPSILON) -> float:
    """``epsilon`` times the sample sd (denominator n-1) of ``values``."""
    v = np.asarray(values, dtype=float).ravel()
    if v.size < 2:
        raise ValueError("caliper width needs at least 2 values")
    return float(epsilon * v.std(ddof=1))


def _empty_pair(ratio: int) -> PairMatching:
    e = np.empty(0, dtype=np.int64)
    return PairMatching(e, e.copy(), np.empty(0), e.copy(), ratio)


def nn_match(ref, cand, dist: np.ndarray, *, admissible: np.ndarray | None = None,
             caliper: float | None = None, ratio: int = 1,
             replacement: bool = True) -> PairMatching:
    """Nearest-neighbour matching of ``ref`` units to ``cand`` units.

    ``dist[a, b]`` is the distance between ``ref[a]`` and ``cand[b]``. A pair is
    admissible when ``admissible`` allows it (default: all) and, if ``caliper``
    is given, ``dist <= caliper``.

    With replacement each ref independently takes its ``ratio`` closest
    admissible candidates. Without replacement all admissible pairs are
    accepted greedily in (distance, ref, cand) order while both ends still have
    capacity; each candidate is used at most once. Refs short of ``ratio``
    links are dropped.
    """
    ref = np.asarray(ref, dtype=np.int64)
    cand = np.asarray(cand, dtype=np.int64)
    D = np.asarray(dist, dtype=float)
    if D.shape != (ref.size, cand.size):
        raise ValueError(f"distance matrix shape {D.shape} != ({ref.size}, {cand.size})")
    if ratio < 1:
        raise ValueError("ratio must be at least 1")
    if ref.size == 0 or cand.size == 0:
        return _empty_pair(ratio)
    # put both sides in ascending unit order so positional ties follow unit index
    ro, co = np.argsort(ref, kind="stable"), np.argsort(cand, kind="stable")
    ref, cand, D = ref[ro], cand[co], D[np.ix_(ro, co)]
    ok = np.isfinite(D) & (D >= 0)
    if admissible is not None:
        ok &= np.asarray(admissible, dtype=bool)[np.ix_(ro, co)]
    if caliper is not None:
        ok &= D <= caliper
    if replacement:
        return _match_with_replacement(ref, cand, D, ok, ratio)
    return _match_greedy(ref, cand, D, ok, ratio)


def _match_with_replacement(ref, cand, D, ok, ratio):
    work = np.where(ok, D, np.inf)
    rows = np.arange(ref.size)
    picks, dists = [], []
    for _ in range(min(ratio, cand.size)):
        j = np.argmin(work, axis=1)  # first minimum -> lowest candidate index
        picks.append(j)
        dists.append(work[rows, j].copy())
        work[rows, j] = np.inf
    if len(picks) < ratio:
        return _empty_pair(ratio)
    J, Dd = np.column_stack(picks), np.column_stack(dists)
    full = np.all(np.isfinite(Dd), axis=1)
    return PairMatching(
        link_ref=np.repeat(ref[full], ratio),
        link_cand=cand[J[full]].ravel(),
        link_dist=Dd[full].ravel(),
        matched_refs=ref[full],
        ratio=ratio,
    )


def _match_greedy(ref, cand, D, ok, ratio):
    a_idx, b_idx = np.nonzero(ok)
    d = D[a_idx, b_idx]
    order = np.lexsort((cand[b_idx], ref[a_idx], d))
    ref_load = np.zeros(ref.size, dtype=np.int64)
    cand_used = np.zeros(cand.size, dtype=bool)
    links: list[tuple[int, int, float]] = []
    open_refs, open_cands = ref.size, cand.size
    for k in order:
        a, b = a_idx[k], b_idx[k]
        if cand_used[b] or ref_load[a] >= ratio:
            continue
        cand_used[b] = True
        ref_load[a] += 1
        links.append((a, b, d[k]))
        open_cands -= 1
        open_refs -= ref_load[a] == ratio
        if open_cands == 0 or open_refs == 0:
            break
    full = ref_load == ratio
    kept = [(ref[a], cand[b], dd) for a, b, dd in links if full[a]]
    # rank order within a ref: by distance then candidate
    kept.sort(key=lambda x: (x[0], x[2], x[1]))
    if not kept:
        return _empty_pair(ratio)
    lr, lc, ld = (np.array(v) for v in zip(*kept))
    return PairMatching(lr.astype(np.int64), lc.astype(np.int64), ld.astype(float), ref[full], ratio)


def default_reference(c: Cohort) -> int:
    """Treatment code with the most units (lowest code on ties)."""
    return int(np.argmax(c.group_sizes)) + 1


def _derived_seed(seed: int, *keys: int) -> int:
    return int(np.random.SeedSequence([int(seed) & 0xFFFFFFFF, *keys]).generate_state(1)[0])


def cluster_sets(logit: np.ndarray, columns: list[int], kind: Clustering, K: int, m: float,
                 seed: int) -> np.ndarray:
    """``n x K`` boolean stratum membership from clustering the given logit columns."""
    n = logit.shape[0]
    if kind is Clustering.NONE or not columns:
        return np.ones((n, 1), dtype=bool)
    V = logit[:, columns]
    if kind is Clustering.KMEANS:
        hc = kmeans(V, K, seed)
        return hard_sets(hc.assignment, K)
    return threshold_assign(fuzzy_cmeans(V, K, m, seed))


def run_algorithm(
    cohort: Cohort,
    gps: np.ndarray,
    spec: AlgorithmSpec | str,
    t: int,
    *,
    K: int = DEFAULT_CLUSTERS,
    m: float = DEFAULT_FUZZY_M,
    epsilon: float = DEFAULT_EPSILON,
    seed: int = 0,
    cache: dict | None = None,
) -> MatchedSet:
    """Match reference treatment ``t`` against every other treatment and intersect.

    ``cohort`` and ``gps`` must be the trimmed cohort and the refit GPS matrix.
    ``cache`` may be shared between calls on the same cohort/gps/seed to reuse
    cluster assignments across algorithms.
    """
    if isinstance(spec, str):
        spec = get_algorithm(spec)
    Z = cohort.Z
    if gps.shape != (cohort.n, Z):
        raise ValueError("gps matrix does not match the cohort")
    if not 1 <= t <= Z:
        raise ValueError(f"reference treatment {t} outside 1..{Z}")
    cache = {} if cache is None else cache
    L = cache.get("logit")
    if L is None:
        L = cache["logit"] = logit_gps(gps)
    ref = cohort.group(t)
    widths = None
    if spec.caliper:
        widths = np.array([caliper_width(L[:, w], epsilon) for w in range(Z)])

    pairs: dict[int, PairMatching] = {}
    for tp in range(1, Z + 1):
        if tp == t:
            continue
        cand = cohort.group(tp)
        key = (spec.clustering, t, tp, K, m)
        sets = cache.get(key)
        if sets is None:
            cols = [w - 1 for w in range(1, Z + 1) if w not in (t, tp)]
            sets = cluster_sets(L, cols, spec.clustering, K, m, _derived_seed(seed, t, tp))
            cache[key] = sets
        if sets.shape[1] == 1:
            admissible = np.ones((ref.size, cand.size), dtype=bool)
        else:
            admissible = (sets[ref].astype(np.int32) @ sets[cand].T.astype(np.int32)) > 0

        both = np.concatenate([ref, cand])
        if spec.distance is Distance.LINEAR_GPS:
            cols = [t - 1]
            D = pairwise_distances(L[ref], L[cand], DistanceSpec(Metric.LINEAR_GPS, (t - 1,)))
        elif spec.distance is Distance.MAHALANOBIS_PAIR:
            cols = [t - 1, tp - 1]
            V = L[:, cols]
            D = pairwise_distances(V[ref], V[cand], DistanceSpec(Metric.MAHALANOBIS),
                                   estimate_covariance(V[both]))
        elif spec.distance is Distance.MAHALANOBIS_GPS:
            cols = list(range(Z))
            D = pairwise_distances(L[ref], L[cand], DistanceSpec(Metric.MAHALANOBIS),
                                   estimate_covariance(L[both]))
        else:
            cols = []
            X = cohort.covariates
            D = pairwise_distances(X[ref], X[cand], DistanceSpec(Metric.MAHALANOBIS),
                                   estimate_covariance(X[both]))

        if widths is not None:
            for c in cols:
                admissible &= np.abs(L[ref, c][:, None] - L[cand, c][None, :]) <= widths[c]
        pairs[tp] = nn_match(ref, cand, D, admissible=admissible, ratio=spec.ratio,
                             replacement=spec.replacement)

    retained = ref
    for pm in pairs.values():
        retained = np.intersect1d(retained, pm.matched_refs, assume_unique=True)
    psi = np.zeros(cohort.n, dtype=np.int64)
    psi[retained] = 1
    for pm in pairs.values():
        keep = np.isin(pm.link_ref, retained)
        np.add.at(psi, pm.link_cand[keep], 1)
    n_wm = np.bincount(cohort.treatments, weights=psi, minlength=Z + 1)[1:].astype(np.int64)
    notes: tuple[str, ...] = ()
    if retained.size == 0:
        notes = (f"{spec.label}: no reference unit was matched in every treatment pair",)
        log.warning(notes[0])
    return MatchedSet(
        reference=t,
        retained_refs=retained,
        psi=psi,
        n_wm=n_wm,
        eligible_ref_count=int(ref.size),
        algorithm=spec.label,
        pairs=pairs,
        warnings=notes,
    )


def unit_weights(c: Cohort, t: int) -> MatchedSet:
    """Pseudo matched set with every unit weighted once (the pre-matched cohort)."""
    psi = np.ones(c.n, dtype=np.int64)
    ref = c.group(t)
    return MatchedSet(
        reference=t,
        retained_refs=ref,
        psi=psi,
        n_wm=c.group_sizes.astype(np.int64),
        eligible_ref_count=int(ref.size),
        algorithm="pre",
    )


def manifest_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".manifest")


def export_matched(ms: MatchedSet, c: Cohort, path: str | Path, **settings) -> Path:
    """Write ``id,treatment,psi`` for every unit with positive weight, plus a
    ``key=value`` manifest next to it. Returns the manifest path."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "treatment", "psi"])
        for i in np.flatnonzero(ms.psi > 0):
            w.writerow([c.ids[i], c.labels[c.treatments[i] - 1], int(ms.psi[i])])
    meta = {
        "algorithm": ms.algorithm,
        "reference": c.labels[ms.reference - 1],
        "eligible_ref_count": ms.eligible_ref_count,
        "retained_refs": len(ms.retained_refs),
        **settings,
    }
    mpath = manifest_path(path)
    mpath.write_text("".join(f"{k}={v}\n" for k, v in meta.items()), encoding="utf-8")
    return mpath


def read_manifest(path: str | Path) -> dict[str, str]:
    out = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        k, _, v = line.partition("=")
        out[k.strip()] = v.strip()
    return out


def import_matched(path: str | Path, c: Cohort) -> MatchedSet:
    """Rebuild a MatchedSet (weights only, no links) from an exported file."""
    path = Path(path)
    meta = read_manifest(manifest_path(path))
    index = {uid: i for i, uid in enumerate(c.ids)}
    psi = np.zeros(c.n, dtype=np.int64)
    with path.open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            i = index.get(row["id"])
            if i is None:
                raise ValueError(f"matched unit {row['id']!r} not in cohort")
            if c.labels[c.treatments[i] - 1] != row["treatment"]:
                raise ValueError(f"treatment mismatch for unit {row['id']!r}")
            psi[i] = int(row["psi"])
    t = c.code_of(meta["reference"])
    retained = np.flatnonzero((psi > 0) & (c.treatments == t))
    return MatchedSet(
        reference=t,
        retained_refs=retained,
        psi=psi,
        n_wm=np.bincount(c.treatments, weights=psi, minlength=c.Z + 1)[1:].astype(np.int64),
        eligible_ref_count=int(meta.get("eligible_ref_count", c.group_sizes[t - 1])),
        algorithm=meta.get("algorithm", ""),
    )
