import csv
import math
from pathlib import Path

import numpy as np
import pytest

from gpsmatch.data import Cohort, load_cohort
from gpsmatch.gps import trim_and_refit
from gpsmatch.simgen import SimConfig, sample_cohort

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def vm15():
    """The 15-unit hand-enumerated cohort and its GPS matrix."""
    with (FIXTURES / "vm15.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    c = Cohort(
        ids=tuple(r["id"] for r in rows),
        covariates=np.array([[float(r["x"])] for r in rows]),
        treatments=np.array([int(r["treatment"]) for r in rows]),
        covariate_names=("x",),
    )
    gps = np.array([[float(r["r1"]), float(r["r2"]), float(r["r3"])] for r in rows])
    return c, gps


@pytest.fixture(scope="session")
def sim3():
    """A small Z=3 simulated cohort after trimming, shared by matching tests."""
    full = sample_cohort(SimConfig(Z=3, n1=120, b=0.5, P=4), seed=11)
    return full, trim_and_refit(full)


def logit(p: float) -> float:
    return math.log(p / (1 - p))


@pytest.fixture
def abc_cohort() -> Cohort:
    return load_cohort(FIXTURES / "cohort_abc.csv")
