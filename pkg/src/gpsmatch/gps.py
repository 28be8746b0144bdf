"""Generalized propensity score: multinomial logit fit, prediction, common support.

The model is a softmax regression with intercept and main effects, category 1
as the reference. It is fitted by Newton-Raphson on the full stacked parameter
block with step-halving, which keeps the log-likelihood non-decreasing.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, logsumexp

from .data import Cohort, CohortError

log = logging.getLogger(__name__)

PROB_CLAMP = 1e-12
SEPARATION_BOUND = 30.0


class ConvergenceError(RuntimeError):
    def __init__(self, iterations: int, msg: str = ""):
        self.iterations = iterations
        super().__init__(msg or f"Newton-Raphson did not converge after {iterations} iterations")


class EmptySupportError(ValueError):
    """No unit lies inside the rectangular common-support region."""


@dataclass(frozen=True, eq=False)
class GpsModel:
    """Fitted softmax regression.

    ``coefficients[k]`` holds ``(intercept, slope_1..slope_P)`` for the
    log-odds of category ``k + 2`` against ``reference_category`` (always 1).
    """

    coefficients: np.ndarray
    reference_category: int = 1
    converged: bool = True
    iterations: int = 0
    loglik_path: tuple[float, ...] = ()
    warnings: tuple[str, ...] = ()

    @property
    def Z(self) -> int:
        return self.coefficients.shape[0] + 1

    @property
    def P(self) -> int:
        return self.coefficients.shape[1] - 1

    @property
    def loglik(self) -> float:
        return self.loglik_path[-1] if self.loglik_path else float("nan")


@dataclass(frozen=True, eq=False)
class EligibilityMask:
    eligible: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    @property
    def n_eligible(self) -> int:
        return int(self.eligible.sum())


@dataclass(frozen=True, eq=False)
class TrimResult:
    cohort: Cohort
    model: GpsModel
    gps: np.ndarray
    mask: EligibilityMask
    initial_model: GpsModel = field(repr=False, default=None)


def _design(X: np.ndarray) -> np.ndarray:
    return np.hstack([np.ones((X.shape[0], 1)), X])


def _linear_predictors(D: np.ndarray, B: np.ndarray) -> np.ndarray:
    # B is (Z-1) x (P+1); reference category gets a zero column.
    eta = D @ B.T
    return np.hstack([np.zeros((D.shape[0], 1)), eta])


def _loglik(D: np.ndarray, Y: np.ndarray, B: np.ndarray) -> float:
    eta = _linear_predictors(D, B)
    return float(np.sum(eta[Y.astype(bool)]) - np.sum(logsumexp(eta, axis=1)))


def _score_hessian(D: np.ndarray, Y: np.ndarray, B: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Gradient and negative Hessian of the log-likelihood in the stacked parameters."""
    eta = _linear_predictors(D, B)
    prob = np.exp(eta - logsumexp(eta, axis=1, keepdims=True))[:, 1:]
    K, q = B.shape
    g = ((Y[:, 1:] - prob).T @ D).ravel()
    H = np.empty((K * q, K * q))
    for a in range(K):
        for b in range(a, K):
            w = prob[:, a] * ((a == b) - prob[:, b])
            blk = D.T @ (w[:, None] * D)
            H[a * q:(a + 1) * q, b * q:(b + 1) * q] = blk
            if a != b:
                H[b * q:(b + 1) * q, a * q:(a + 1) * q] = blk.T
    return g, H


def _newton_direction(g: np.ndarray, H: np.ndarray) -> np.ndarray:
    jitter = 0.0
    eye = np.eye(H.shape[0])
    for _ in range(12):
        try:
            L = np.linalg.cholesky(H + jitter * eye)
        except np.linalg.LinAlgError:
            jitter = 1e-8 if jitter == 0.0 else jitter * 100.0
            continue
        return np.linalg.solve(L.T, np.linalg.solve(L, g))
    return np.linalg.lstsq(H, g, rcond=None)[0]


def fit_gps(
    c: Cohort,
    *,
    max_iter: int = 200,
    score_tol: float = 1e-8,
    rel_tol: float = 1e-12,
) -> GpsModel:
    """Maximum-likelihood multinomial logistic regression of treatment on covariates."""
    Z, P = c.Z, c.P
    if c.n <= Z * (P + 1):
        log.warning("n=%d is small for %d GPS parameters", c.n, (Z - 1) * (P + 1))
    D = _design(c.covariates)
    Y = c.indicator().astype(float)
    q = P + 1
    B = np.zeros((Z - 1, q))
    # start from the intercept-only solution
    props = c.group_sizes / c.n
    B[:, 0] = np.log(props[1:] / props[0])
    ll = _loglik(D, Y, B)
    path = [ll]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        g, H = _score_hessian(D, Y, B)
        if np.max(np.abs(g)) < score_tol:
            converged = True
            break
        step = _newton_direction(g, H).reshape(B.shape)
        t = 1.0
        for _ in range(60):
            B_new = B + t * step
            ll_new = _loglik(D, Y, B_new)
            if np.isfinite(ll_new) and ll_new >= ll:
                break
            t *= 0.5
        else:
            # no ascent possible at working precision: we are at the optimum
            converged = True
            break
        rel = abs(ll_new - ll) / max(abs(ll), 1e-300)
        B, ll = B_new, ll_new
        path.append(ll)
        if rel < rel_tol:
            converged = True
            break
    if not converged:
        raise ConvergenceError(it)
    notes = []
    if np.max(np.abs(B)) > SEPARATION_BOUND:
        notes.append(f"possible quasi-separation: max |coefficient| = {np.max(np.abs(B)):.3g}")
        log.warning(notes[-1])
    return GpsModel(
        coefficients=B,
        reference_category=1,
        converged=True,
        iterations=len(path) - 1,
        loglik_path=tuple(path),
        warnings=tuple(notes),
    )


def predict_gps(m: GpsModel, c: Cohort | np.ndarray) -> np.ndarray:
    """``n x Z`` matrix of estimated assignment probabilities; rows sum to one."""
    X = c.covariates if isinstance(c, Cohort) else np.asarray(c, dtype=float)
    if X.ndim != 2 or X.shape[1] != m.P:
        raise ValueError(f"model was fitted with P={m.P} covariates, got {X.shape[-1]}")
    eta = _linear_predictors(_design(X), m.coefficients)
    prob = np.exp(eta - logsumexp(eta, axis=1, keepdims=True))
    prob = np.clip(prob, PROB_CLAMP, 1.0 - PROB_CLAMP)
    return prob / prob.sum(axis=1, keepdims=True)


def logit_gps(g: np.ndarray) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    return np.log(g) - np.log1p(-g)


def sigmoid(x: np.ndarray) -> np.ndarray:
    return expit(x)


def support_bounds(g: np.ndarray, treatments: np.ndarray, Z: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-column ``(max of group minima, min of group maxima)``."""
    mins = np.empty((Z, g.shape[1]))
    maxs = np.empty((Z, g.shape[1]))
    for w in range(1, Z + 1):
        gw = g[treatments == w]
        if gw.shape[0] == 0:
            raise CohortError(f"treatment group {w} is empty")
        mins[w - 1] = gw.min(axis=0)
        maxs[w - 1] = gw.max(axis=0)
    return mins.max(axis=0), maxs.min(axis=0)


def common_support(g: np.ndarray, c: Cohort) -> EligibilityMask:
    """Rectangular common support; a unit is eligible iff every column lies strictly inside."""
    lower, upper = support_bounds(g, c.treatments, c.Z)
    eligible = np.all((g > lower) & (g < upper), axis=1)
    if not eligible.any():
        raise EmptySupportError("empty common support")
    return EligibilityMask(eligible=eligible, lower=lower, upper=upper)


def trim_and_refit(c: Cohort, **fit_kw) -> TrimResult:
    """Fit, drop units outside common support, refit exactly once on the survivors."""
    m0 = fit_gps(c, **fit_kw)
    g0 = predict_gps(m0, c)
    mask = common_support(g0, c)
    kept = c.treatments[mask.eligible]
    for w in range(1, c.Z + 1):
        k = int(np.sum(kept == w))
        if k < 2:
            raise EmptySupportError(f"treatment group {c.labels[w - 1]} left with {k} unit(s) after trimming")
    survivors = c.subset(mask.eligible)
    m1 = fit_gps(survivors, **fit_kw)
    return TrimResult(cohort=survivors, model=m1, gps=predict_gps(m1, survivors), mask=mask, initial_model=m0)


def write_coefficients(m: GpsModel, path, labels: tuple[str, ...] | None = None,
                       names: tuple[str, ...] | None = None) -> None:
    labels = labels or tuple(str(w) for w in range(1, m.Z + 1))
    names = names or tuple(f"x{p}" for p in range(1, m.P + 1))
    terms = ("(intercept)", *names)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["category", "term", "estimate"])
        for k in range(m.Z - 1):
            for j, term in enumerate(terms):
                w.writerow([labels[k + 1], term, repr(float(m.coefficients[k, j]))])


def write_eligibility(mask: EligibilityMask, ids: tuple[str, ...], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "eligible"])
        for i, e in zip(ids, mask.eligible):
            w.writerow([i, int(e)])
