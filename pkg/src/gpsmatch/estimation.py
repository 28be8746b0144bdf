"""Pairwise ATT estimates from a matched cohort."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import Cohort
from .matching import MatchedSet

Z_CRIT = 1.96


@dataclass(frozen=True)
class PairEstimate:
    j: int
    k: int
    estimate: float
    std_error: float

    @property
    def significant(self) -> bool:
        return abs(self.estimate) > Z_CRIT * self.std_error


@dataclass(frozen=True, eq=False)
class AttEstimates:
    """Matched outcome means per group and the contrasts against the reference."""

    reference: int
    means: np.ndarray
    variances: np.ndarray
    n_eff: np.ndarray
    labels: tuple[str, ...]

    def contrast(self, j: int, k: int) -> PairEstimate:
        """``mean_j - mean_k`` with a Kish-effective-size two-sample SE (codes 1-based)."""
        a, b = j - 1, k - 1
        se = np.sqrt(self.variances[a] / self.n_eff[a] + self.variances[b] / self.n_eff[b])
        return PairEstimate(j, k, float(self.means[a] - self.means[b]), float(se))

    @property
    def pairs(self) -> list[PairEstimate]:
        t = self.reference
        return [self.contrast(t, k) for k in range(1, len(self.means) + 1) if k != t]


def estimate_att(c: Cohort, ms: MatchedSet) -> AttEstimates:
    """Weighted outcome means ``(1/n_wm) sum_i Y_i T_iw psi_iw`` and their spreads.

    The within-group variance is the psi-weighted (population-form) variance;
    the effective size is ``(sum psi)^2 / sum psi^2``.
    """
    if c.outcomes is None:
        raise ValueError("cohort has no outcomes")
    if ms.empty:
        raise ValueError("matched set is empty")
    psi = ms.psi.astype(float)
    Z = c.Z
    means, var, neff = np.empty(Z), np.empty(Z), np.empty(Z)
    for w in range(1, Z + 1):
        idx = c.group(w)
        wts = psi[idx]
        tot = wts.sum()
        if tot <= 0:
            raise ValueError(f"empty matched group {c.labels[w - 1]}")
        y = c.outcomes[idx]
        means[w - 1] = wts @ y / tot
        var[w - 1] = wts @ (y - means[w - 1]) ** 2 / tot
        neff[w - 1] = tot ** 2 / (wts @ wts)
    return AttEstimates(ms.reference, means, var, neff, c.labels)


def write_estimates(est: AttEstimates, path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["pair", "estimate", "std_error", "significant"])
        for pe in est.pairs:
            w.writerow([
                f"{est.labels[pe.j - 1]}-{est.labels[pe.k - 1]}",
                f"{pe.estimate:.4f}",
                f"{pe.std_error:.4f}",
                int(pe.significant),
            ])
