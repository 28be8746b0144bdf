"""Synthetic cohorts from a multivariate skew-t design and the factorial grid.

Covariates in group ``w`` are drawn as ``mu_w + omega * S / sqrt(V/df)`` with
``S`` a standardized multivariate skew-normal (Azzalini's stochastic
representation, slant ``eta`` on every coordinate) and ``V ~ chi2(df)``.
``df = inf`` gives the skew-normal and ``eta = 0`` the normal/t case.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from itertools import product
from typing import Iterable, Sequence

import numpy as np

from .data import Cohort

# factor levels for Z in {3, 5}
Z35_LEVELS = {
    "Z": (3, 5),
    "n1": (600, 1200),
    "gamma": (1, 2),
    "b": (0.0, 0.25, 0.5, 0.75, 1.0),
    "lam": (0.0, 0.25),
    "sigma2_sq": (0.5, 1.0, 2.0),
    "sigma3_sq": (0.5, 1.0, 2.0),
    "eta": (-3.5, 0.0, 3.5),
    "df": (7.0, math.inf),
    "P": (5, 10, 20),
}
# Z = 10
Z10_LEVELS = {
    "Z": (10,),
    "n1": (900,),
    "gamma": (1, 2),
    "b": (0.0, 0.25, 0.5, 0.75, 1.0),
    "lam": (0.0,),
    "sigma2_sq": (1.0,),
    "sigma3_sq": (1.0,),
    "eta": (0.0,),
    "df": (7.0, math.inf),
    "P": (10, 20),
}
FACTORS = tuple(Z35_LEVELS)
MEAN_PATTERNS = ("recycle", "block")


class SimulationError(ValueError):
    pass


@dataclass(frozen=True)
class SimConfig:
    Z: int = 3
    n1: int = 600
    gamma: float = 1
    b: float = 0.0
    lam: float = 0.0
    sigma2_sq: float = 1.0
    sigma3_sq: float = 1.0
    eta: float = 0.0
    df: float = math.inf
    P: int = 5
    mean_pattern: str = "recycle"

    def __post_init__(self):
        if self.Z not in (3, 5, 10):
            raise SimulationError(f"Z must be 3, 5 or 10, got {self.Z}")
        if self.Z == 10 and (self.lam != 0 or self.sigma2_sq != 1 or self.sigma3_sq != 1 or self.eta != 0):
            raise SimulationError("Z=10 uses identity covariance and no skew (lam=0, sigma^2=1, eta=0)")
        if self.mean_pattern not in MEAN_PATTERNS:
            raise SimulationError(f"mean_pattern must be one of {MEAN_PATTERNS}")
        if self.P < 1 or self.n1 < 1 or self.gamma <= 0 or not self.df > 0:
            raise SimulationError("P, n1, gamma and df must be positive")

    @property
    def group_sizes(self) -> tuple[int, ...]:
        n1 = self.n1
        n2 = int(round(self.gamma * n1))
        n3 = int(round(self.gamma ** 2 * n1))
        if self.Z == 3:
            return (n1, n2, n3)
        five = (n1, n2, n3, n2, n3)
        return five if self.Z == 5 else five + five

    def mean(self, w: int) -> np.ndarray:
        """Location vector of group ``w`` (1-based)."""
        p = np.arange(self.P)
        if self.mean_pattern == "recycle":
            on = p % self.Z == w - 1
        else:
            on = p // math.ceil(self.P / self.Z) == w - 1
        return np.where(on, self.b, 0.0)

    def scale_matrix(self, w: int) -> np.ndarray:
        if self.Z == 10:
            return np.eye(self.P)
        diag = (1.0, self.sigma2_sq, self.sigma3_sq, self.sigma2_sq, self.sigma3_sq)[w - 1]
        S = np.full((self.P, self.P), float(self.lam))
        np.fill_diagonal(S, diag)
        return S

    def key(self) -> tuple:
        return tuple(getattr(self, f) for f in FACTORS)


def _generator(seed, w: int) -> np.random.Generator:
    entropy = seed if isinstance(seed, (int, np.integer)) else [int(s) for s in seed]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy, spawn_key=(w,))))


def sample_skew_t(rng: np.random.Generator, n: int, loc: np.ndarray, scale: np.ndarray,
                  slant: np.ndarray | float, df: float) -> np.ndarray:
    """``n`` draws from the multivariate skew-t with location ``loc``, scale
    matrix ``scale``, slant vector ``slant`` and ``df`` degrees of freedom."""
    P = loc.shape[0]
    omega = np.sqrt(np.diag(scale))
    corr = scale / np.outer(omega, omega)
    alpha = np.broadcast_to(np.asarray(slant, dtype=float), (P,))
    if np.any(alpha != 0):
        ca = corr @ alpha
        delta = ca / np.sqrt(1.0 + alpha @ ca)
        chol = np.linalg.cholesky(corr - np.outer(delta, delta))
        u0 = np.abs(rng.standard_normal(n))
        S = u0[:, None] * delta + rng.standard_normal((n, P)) @ chol.T
    else:
        S = rng.standard_normal((n, P)) @ np.linalg.cholesky(corr).T
    if math.isfinite(df):
        S = S / np.sqrt(rng.chisquare(df, size=n) / df)[:, None]
    return loc + S * omega


def sample_cohort(cfg: SimConfig, seed: int | Sequence[int] = 0) -> Cohort:
    """Draw one synthetic cohort; each group uses its own Philox stream."""
    blocks, codes = [], []
    for w, n_w in enumerate(cfg.group_sizes, start=1):
        scale = cfg.scale_matrix(w)
        try:
            np.linalg.cholesky(scale)
        except np.linalg.LinAlgError:
            raise SimulationError(f"scale matrix of group {w} is not positive definite") from None
        rng = _generator(seed, w)
        blocks.append(sample_skew_t(rng, n_w, cfg.mean(w), scale, cfg.eta, cfg.df))
        codes.append(np.full(n_w, w, dtype=np.int64))
    X = np.vstack(blocks)
    return Cohort(
        ids=tuple(str(i) for i in range(1, X.shape[0] + 1)),
        covariates=X,
        treatments=np.concatenate(codes),
    )


@dataclass(frozen=True)
class ConfigGrid:
    configs: tuple[SimConfig, ...]
    excluded: tuple[tuple[SimConfig, str], ...] = field(default=(), repr=False)

    def __len__(self) -> int:
        return len(self.configs)

    def __iter__(self):
        return iter(self.configs)


def _exclusion(cfg: SimConfig) -> str | None:
    if cfg.P == 20 and cfg.n1 == 600 and cfg.Z in (3, 5):
        return "P=20 with n1=600"
    if cfg.P == 20 and cfg.b == 1:
        return "P=20 with b=1"
    return None


def cross(levels: dict[str, Iterable], exclude: bool = True, **fixed) -> ConfigGrid:
    """Cross product of factor levels in lexicographic factor order."""
    names = [f for f in FACTORS]
    values = [tuple(levels[f]) for f in names]
    kept, dropped = [], []
    for combo in product(*values):
        cfg = SimConfig(**dict(zip(names, combo)), **fixed)
        why = _exclusion(cfg) if exclude else None
        if why:
            dropped.append((cfg, why))
        else:
            kept.append(cfg)
    return ConfigGrid(tuple(kept), tuple(dropped))


def enumerate_grid(which: str) -> ConfigGrid:
    """The full design for ``'z35'`` or ``'z10'`` with the documented exclusions."""
    w = which.lower()
    if w == "z35":
        return cross(Z35_LEVELS)
    if w == "z10":
        return cross(Z10_LEVELS)
    raise ValueError(f"unknown grid {which!r}; use 'z35' or 'z10'")


def desk_config(**overrides) -> SimConfig:
    """The fixed desk-scale cell: n1=600, gamma=1, lam=0, unit variances, no skew, normal tails."""
    return replace(SimConfig(), **overrides)
