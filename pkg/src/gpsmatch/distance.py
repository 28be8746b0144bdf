"""Pairwise distances between a reference set and a candidate set.

Mahalanobis distances use a pseudo-inverse covariance: eigenvalues below
``EIGEN_FLOOR * lambda_max`` are dropped, which keeps near-degenerate logit-GPS
columns usable.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.spatial.distance import cdist

EIGEN_FLOOR = 1e-10


class Metric(str, Enum):
    LINEAR_GPS = "linear_gps"
    EUCLIDEAN = "euclidean"
    MAHALANOBIS = "mahalanobis"


@dataclass(frozen=True)
class DistanceSpec:
    metric: Metric
    columns: tuple[int, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "metric", Metric(self.metric))
        if self.columns is not None:
            if len(self.columns) == 0:
                raise ValueError("columns must be nonempty")
            object.__setattr__(self, "columns", tuple(int(c) for c in self.columns))
        if self.metric is Metric.LINEAR_GPS and (self.columns is None or len(self.columns) != 1):
            raise ValueError("linear GPS distance needs exactly one column")


@dataclass(frozen=True, eq=False)
class CovarianceEstimate:
    matrix: np.ndarray
    inverse: np.ndarray
    rank: int
    eigen_floor: float
    whitener: np.ndarray  # d x rank; x @ whitener has identity covariance on the kept subspace

    @classmethod
    def from_matrix(cls, S: np.ndarray, floor: float = EIGEN_FLOOR) -> "CovarianceEstimate":
        S = np.atleast_2d(np.asarray(S, dtype=float))
        S = 0.5 * (S + S.T)
        lam, vec = np.linalg.eigh(S)
        lam_max = lam.max() if lam.size else 0.0
        keep = lam > floor * lam_max if lam_max > 0 else np.zeros_like(lam, dtype=bool)
        lam_k, vec_k = lam[keep], vec[:, keep]
        inverse = (vec_k / lam_k) @ vec_k.T
        return cls(
            matrix=S,
            inverse=inverse,
            rank=int(keep.sum()),
            eigen_floor=float(lam_k.min()) if lam_k.size else 0.0,
            whitener=vec_k / np.sqrt(lam_k),
        )


def estimate_covariance(data) -> CovarianceEstimate:
    """Sample covariance (denominator n-1) and its floored pseudo-inverse."""
    V = np.asarray(data, dtype=float)
    if V.ndim == 1:
        V = V[:, None]
    if V.shape[0] < 2:
        raise ValueError("covariance needs at least 2 rows")
    return CovarianceEstimate.from_matrix(np.cov(V, rowvar=False, ddof=1))


def _select(A: np.ndarray, cols) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = A[:, None]
    return A if cols is None else A[:, list(cols)]


def pairwise_distances(ref, cand, spec: DistanceSpec,
                       cov: CovarianceEstimate | None = None) -> np.ndarray:
    """``a x b`` matrix of distances from each reference row to each candidate row.

    For Mahalanobis without ``cov`` the covariance is estimated on the stacked
    reference and candidate rows.
    """
    A, B = _select(ref, spec.columns), _select(cand, spec.columns)
    if A.shape[1] != B.shape[1]:
        raise ValueError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]} columns")
    if spec.metric is Metric.LINEAR_GPS:
        return np.abs(A[:, :1] - B[:, 0][None, :])
    if spec.metric is Metric.EUCLIDEAN:
        return cdist(A, B)
    if cov is None:
        cov = estimate_covariance(np.vstack([A, B]))
    if cov.matrix.shape[0] != A.shape[1]:
        raise ValueError("covariance dimension does not match the data")
    return cdist(A @ cov.whitener, B @ cov.whitener)
