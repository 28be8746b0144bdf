"""Covariate balance of a matched (or pre-matched) cohort.

All pairwise standardized biases for a covariate share the denominator
``delta_pt``, the sd of that covariate among reference-group units of the full
(pre-trim) sample, so ``SB_jk + SB_kl == SB_jl``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path

import numpy as np

from .data import Cohort
from .matching import MatchedSet


class BalanceError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class BalanceReport:
    """``sb[p, j, k]`` is the full antisymmetric Z x Z table per covariate."""

    sb: np.ndarray
    max2sb: np.ndarray
    maxmax2sb: float
    meanmax2sb: float
    prop_matched: float
    denominators: np.ndarray
    means: np.ndarray
    covariate_names: tuple[str, ...] = ()
    labels: tuple[str, ...] = ()

    def pairs(self):
        """Yield ``(p, j, k, sb)`` for ``j < k`` (0-based codes)."""
        P, Z, _ = self.sb.shape
        for p in range(P):
            for j, k in combinations(range(Z), 2):
                yield p, j, k, float(self.sb[p, j, k])


def reference_scale(full: Cohort, t: int) -> np.ndarray:
    """``delta_pt``: per-covariate sd (ddof=1) among units with W = t in the full sample."""
    Xt = full.covariates[full.group(t)]
    if Xt.shape[0] < 2:
        raise BalanceError("reference group needs at least 2 units")
    return Xt.std(axis=0, ddof=1)


def weighted_means(c: Cohort, ms: MatchedSet | np.ndarray | None = None) -> np.ndarray:
    """``P x Z`` matrix of psi-weighted group means (unit weights when ``ms`` is None)."""
    psi = np.ones(c.n) if ms is None else np.asarray(ms.psi if isinstance(ms, MatchedSet) else ms, dtype=float)
    if psi.shape != (c.n,):
        raise ValueError("weights must have one entry per unit")
    T = c.indicator()
    n_wm = (T * psi[:, None]).sum(axis=0)
    if np.any(n_wm <= 0):
        empty = [c.labels[w] for w in np.flatnonzero(n_wm <= 0)]
        raise BalanceError(f"empty matched group: {', '.join(empty)}")
    return (c.covariates.T @ (T * psi[:, None])) / n_wm


def balance_report(c: Cohort, ms: MatchedSet | None, delta: np.ndarray,
                   prop_matched: float | None = None) -> BalanceReport:
    """Standardized pairwise biases and their summaries.

    ``delta`` comes from :func:`reference_scale` on the full cohort.
    ``prop_matched`` defaults to the matched set's retained fraction, or NaN
    for a pre-matched cohort (``ms is None``).
    """
    delta = np.asarray(delta, dtype=float)
    if delta.shape != (c.P,):
        raise ValueError("delta must have one entry per covariate")
    if np.any(~(delta > 0)):
        bad = [c.covariate_names[p] for p in np.flatnonzero(~(delta > 0))]
        raise BalanceError(f"zero reference-group sd for covariate(s): {', '.join(bad)}")
    xbar = weighted_means(c, ms)
    sb = (xbar[:, :, None] - xbar[:, None, :]) / delta[:, None, None]
    max2sb = np.abs(sb).max(axis=(1, 2))
    if prop_matched is None:
        prop_matched = float("nan") if ms is None else ms.prop_matched
    return BalanceReport(
        sb=sb,
        max2sb=max2sb,
        maxmax2sb=float(max2sb.max()),
        meanmax2sb=float(max2sb.mean()),
        prop_matched=float(prop_matched),
        denominators=delta,
        means=xbar,
        covariate_names=c.covariate_names,
        labels=c.labels,
    )


def write_balance(rep: BalanceReport, path: str | Path) -> None:
    """Three CSV blocks separated by blank lines: long SB table, Max2SB per
    covariate, and the scalar summaries."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["covariate", "pair", "sb"])
        for p, j, k, v in rep.pairs():
            w.writerow([rep.covariate_names[p], f"{rep.labels[j]}-{rep.labels[k]}", f"{v:.4f}"])
        w.writerow([])
        w.writerow(["covariate", "max2sb"])
        for name, v in zip(rep.covariate_names, rep.max2sb):
            w.writerow([name, f"{v:.4f}"])
        w.writerow([])
        w.writerow(["maxmax2sb", "meanmax2sb", "prop_matched"])
        w.writerow([f"{rep.maxmax2sb:.4f}", f"{rep.meanmax2sb:.4f}", f"{rep.prop_matched:.4f}"])


def read_balance(path: str | Path) -> dict[str, list[dict[str, str]]]:
    """Parse the file written by :func:`write_balance` into its three blocks."""
    blocks: list[list[list[str]]] = [[]]
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for row in csv.reader(fh):
            if not row:
                blocks.append([])
            else:
                blocks[-1].append(row)
    names = ("sb", "max2sb", "summary")
    return {name: [dict(zip(b[0], r)) for r in b[1:]] for name, b in zip(names, blocks)}
