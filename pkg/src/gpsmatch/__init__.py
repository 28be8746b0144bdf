"""Generalized-propensity-score matching for three or more treatment groups."""

__version__ = "0.1.0"

from .balance import BalanceReport, balance_report, reference_scale, weighted_means
from .data import Cohort, CohortError, CsvSchema, load_cohort, summarize_cohort, write_cohort
from .estimation import AttEstimates, estimate_att
from .gps import common_support, fit_gps, logit_gps, predict_gps, trim_and_refit
from .matching import ALGORITHMS, AlgorithmSpec, MatchedSet, nn_match, run_algorithm
from .simgen import SimConfig, enumerate_grid, sample_cohort

__all__ = [
    "ALGORITHMS", "AlgorithmSpec", "AttEstimates", "BalanceReport", "Cohort", "CohortError",
    "CsvSchema", "MatchedSet", "SimConfig", "balance_report", "common_support", "enumerate_grid",
    "estimate_att", "fit_gps", "load_cohort", "logit_gps", "nn_match", "predict_gps",
    "reference_scale", "run_algorithm", "sample_cohort", "summarize_cohort", "trim_and_refit",
    "weighted_means", "write_cohort",
]
