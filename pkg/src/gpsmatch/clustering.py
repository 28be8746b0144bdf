"""k-means and fuzzy c-means over logit-GPS columns.

Cluster labels are 0-based. Both routines are deterministic for a fixed seed
and keep their objective trace so callers can check monotone descent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

MAX_ITER = 300
N_RESTARTS = 10
FUZZY_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class HardClustering:
    assignment: np.ndarray
    centers: np.ndarray
    inertia: float
    inertia_path: tuple[float, ...] = ()

    @property
    def K(self) -> int:
        return self.centers.shape[0]


@dataclass(frozen=True, eq=False)
class FuzzyClustering:
    membership: np.ndarray
    centers: np.ndarray
    objective: float
    m: float
    objective_path: tuple[float, ...] = ()

    @property
    def K(self) -> int:
        return self.centers.shape[0]


def _as_2d(data) -> np.ndarray:
    V = np.asarray(data, dtype=float)
    if V.ndim == 1:
        V = V[:, None]
    if V.ndim != 2 or V.shape[1] < 1:
        raise ValueError("data must be an n x d matrix with d >= 1")
    return V


def _sqdist(V: np.ndarray, C: np.ndarray) -> np.ndarray:
    return cdist(V, C, "sqeuclidean")


def kmeans_plusplus(V: np.ndarray, K: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding. Falls back to the lowest-index unused point once all
    remaining points coincide with a chosen center."""
    n = V.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = _sqdist(V, V[chosen])[:, 0]
    for _ in range(1, K):
        total = d2.sum()
        if total > 0:
            i = int(rng.choice(n, p=d2 / total))
        else:
            used = set(chosen)
            i = next(j for j in range(n) if j not in used)
        chosen.append(i)
        d2 = np.minimum(d2, _sqdist(V, V[i:i + 1])[:, 0])
    return V[chosen].copy()


def _repair_empty(V: np.ndarray, labels: np.ndarray, centers: np.ndarray, K: int) -> np.ndarray:
    labels = labels.copy()
    for k in range(K):
        counts = np.bincount(labels, minlength=K)
        if counts[k] > 0:
            continue
        d2 = np.sum((V - centers[labels]) ** 2, axis=1)
        # only steal from clusters that keep at least one member
        d2[counts[labels] < 2] = -1.0
        i = int(np.argmax(d2))
        labels[i] = k
        centers[k] = V[i]
    return labels


def _lloyd(V: np.ndarray, centers: np.ndarray, max_iter: int) -> HardClustering:
    K = centers.shape[0]
    labels = None
    path: list[float] = []
    for _ in range(max_iter):
        new = np.argmin(_sqdist(V, centers), axis=1)
        if labels is not None and np.array_equal(new, labels):
            break
        labels = _repair_empty(V, new, centers, K)
        centers = np.vstack([V[labels == k].mean(axis=0) for k in range(K)])
        path.append(float(np.sum((V - centers[labels]) ** 2)))
    inertia = float(np.sum((V - centers[labels]) ** 2))
    return HardClustering(labels, centers, inertia, tuple(path))


def kmeans(data, K: int, seed: int = 0, *, n_restarts: int = N_RESTARTS,
           max_iter: int = MAX_ITER) -> HardClustering:
    """Lloyd's algorithm from k-means++ starts; the best of ``n_restarts`` runs
    (lowest inertia, earliest restart on ties) is returned."""
    V = _as_2d(data)
    n = V.shape[0]
    if K < 1:
        raise ValueError("K must be at least 1")
    if K > n:
        raise ValueError(f"K={K} exceeds the number of points n={n}")
    best = None
    for child in np.random.SeedSequence(seed).spawn(n_restarts):
        rng = np.random.default_rng(child)
        fit = _lloyd(V, kmeans_plusplus(V, K, rng), max_iter)
        if best is None or fit.inertia < best.inertia:
            best = fit
    return best


def fcm_memberships(V: np.ndarray, centers: np.ndarray, m: float) -> np.ndarray:
    """Membership update ``u_ik = 1 / sum_j (d_ik / d_ij)^(2/(m-1))``.

    A point sitting on one or more centers shares membership equally among
    those centers and has zero elsewhere.
    """
    d2 = _sqdist(V, centers)
    zero = d2 <= np.finfo(float).tiny
    with np.errstate(divide="ignore"):
        inv = d2 ** (-1.0 / (m - 1.0))
    hit = zero.any(axis=1)
    inv[hit] = zero[hit].astype(float)
    # normalise in a scaled form to avoid overflow for tiny distances
    inv /= inv.max(axis=1, keepdims=True)
    return inv / inv.sum(axis=1, keepdims=True)


def fcm_objective(V: np.ndarray, U: np.ndarray, centers: np.ndarray, m: float) -> float:
    return float(np.sum(U ** m * _sqdist(V, centers)))


def fuzzy_cmeans(data, K: int, m: float = 2.0, seed: int = 0, *,
                 max_iter: int = MAX_ITER, tol: float = FUZZY_TOL) -> FuzzyClustering:
    """Fuzzy c-means by alternating center and membership updates."""
    V = _as_2d(data)
    n = V.shape[0]
    if not m > 1.0:
        raise ValueError("fuzzy exponent m must exceed 1")
    if K < 1 or K > n:
        raise ValueError(f"K={K} must lie in 1..n (n={n})")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    centers = kmeans_plusplus(V, K, rng)
    U = fcm_memberships(V, centers, m)
    path = [fcm_objective(V, U, centers, m)]
    for _ in range(max_iter):
        Um = U ** m
        centers = (Um.T @ V) / Um.sum(axis=0)[:, None]
        U_new = fcm_memberships(V, centers, m)
        path.append(fcm_objective(V, U_new, centers, m))
        delta = np.max(np.abs(U_new - U))
        U = U_new
        if delta < tol:
            break
    return FuzzyClustering(U, centers, path[-1], m, tuple(path))


def threshold_assign(f: FuzzyClustering) -> np.ndarray:
    """Boolean ``n x K`` set-membership matrix: unit i is in set k iff ``u_ik >= 1/K``.

    The row maximum is always included so floating-point rounding of a fully
    fuzzy row cannot leave a unit without a set.
    """
    U = f.membership
    K = U.shape[1]
    sets = U >= 1.0 / K
    sets[np.arange(U.shape[0]), np.argmax(U, axis=1)] = True
    return sets


def hard_sets(assignment: np.ndarray, K: int) -> np.ndarray:
    """One-hot ``n x K`` set matrix for a hard partition."""
    S = np.zeros((assignment.shape[0], K), dtype=bool)
    S[np.arange(assignment.shape[0]), assignment] = True
    return S
