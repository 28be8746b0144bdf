import numpy as np
import pytest
import statsmodels.api as sm
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gpsmatch.data import Cohort
from gpsmatch.gps import (
    EmptySupportError,
    GpsModel,
    common_support,
    fit_gps,
    logit_gps,
    predict_gps,
    sigmoid,
    support_bounds,
    trim_and_refit,
)
from gpsmatch.simgen import SimConfig, sample_cohort


def _cohort(X, W):
    X = np.asarray(X, dtype=float).reshape(len(W), -1)
    return Cohort(tuple(str(i) for i in range(len(W))), X, np.asarray(W))


def test_zero_covariates_give_group_proportions():
    W = np.array([1] * 5 + [2] * 3 + [3] * 2)
    m = fit_gps(_cohort(np.zeros(10), W))
    g = predict_gps(m, np.zeros((10, 1)))
    assert np.allclose(g, [0.5, 0.3, 0.2], atol=1e-10)


def test_two_groups_agree_with_binary_logit():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(300, 3))
    eta = 0.3 + X @ [0.8, -0.5, 0.2]
    W = np.where(rng.random(300) < 1 / (1 + np.exp(-eta)), 2, 1)
    m = fit_gps(_cohort(X, W))
    ref = sm.Logit((W == 2).astype(float), sm.add_constant(X)).fit(disp=0, tol=1e-12, maxiter=200)
    assert np.max(np.abs(m.coefficients[0] - ref.params)) < 1e-6


def test_three_groups_agree_with_multinomial_logit():
    c = sample_cohort(SimConfig(Z=3, n1=150, b=0.5, P=3), seed=2)
    m = fit_gps(c)
    ref = sm.MNLogit(c.treatments, sm.add_constant(c.covariates)).fit(disp=0, method="newton", maxiter=100)
    assert np.max(np.abs(m.coefficients - np.asarray(ref.params).T)) < 1e-6
    assert np.max(np.abs(predict_gps(m, c) - ref.predict(sm.add_constant(c.covariates)))) < 1e-8


def test_balanced_covariate_has_zero_slopes():
    x = np.array([-2.0, -0.5, 0.3, 1.7])
    X = np.tile(x, 3)
    W = np.repeat([1, 2, 3], 4)
    m = fit_gps(_cohort(X, W))
    assert np.all(np.abs(m.coefficients[:, 1]) < 1e-6)


def test_predict_special_models():
    intercept = GpsModel(np.array([[np.log(3 / 5), 0.0], [np.log(2 / 5), 0.0]]))
    assert np.allclose(predict_gps(intercept, np.array([[7.0], [-1.0]])), [0.5, 0.3, 0.2])
    zero = GpsModel(np.zeros((3, 3)))
    assert np.allclose(predict_gps(zero, np.ones((4, 2))), 0.25)
    sym = GpsModel(np.array([[0.0, 1.0]]))
    assert np.allclose(predict_gps(sym, np.array([[0.0]])), [0.5, 0.5])
    with pytest.raises(ValueError):
        predict_gps(sym, np.zeros((2, 3)))


def test_logit_examples():
    assert logit_gps(np.array([0.5]))[0] == 0.0
    assert abs(logit_gps(np.array([0.731058578630074]))[0] - 1.0) < 1e-9


def test_logit_inverts_sigmoid_on_stated_range():
    x = np.linspace(-30, 30, 60001)[1:-1]
    assert np.max(np.abs(logit_gps(sigmoid(x)) - x)) < 1e-9


@settings(max_examples=50, deadline=None)
@given(arrays(float, 20, elements=st.floats(-15, 15)))
def test_logit_inverts_sigmoid_where_float64_resolves_it(x):
    assert np.max(np.abs(logit_gps(sigmoid(x)) - x)) < 1e-9


@settings(max_examples=50, deadline=None)
@given(arrays(float, (10, 2), elements=st.floats(1e-6, 1 - 1e-6)))
def test_logit_is_monotone(p):
    a, b = p[:, 0], p[:, 1]
    la, lb = logit_gps(a), logit_gps(b)
    assert np.all((la < lb) == (a < b))


def test_rows_sum_to_one_and_loglik_never_drops():
    for seed in range(5):
        c = sample_cohort(SimConfig(Z=5, n1=80, b=1.0, P=5, eta=3.5, df=7), seed=seed)
        m = fit_gps(c)
        g = predict_gps(m, c)
        assert np.max(np.abs(g.sum(axis=1) - 1)) < 1e-10
        path = np.array(m.loglik_path)
        assert np.all(np.diff(path) >= 0)
        assert m.converged and m.iterations == len(path) - 1


def test_support_six_unit_example():
    r1 = np.array([0.1, 0.2, 0.3, 0.25, 0.5, 0.6])
    g = np.column_stack([r1, 1 - r1])
    W = np.array([1, 1, 1, 2, 2, 2])
    lo, hi = support_bounds(g, W, 2)
    assert lo[0] == 0.25 and hi[0] == 0.3
    # the open interval (0.25, 0.3) holds none of the six units
    with pytest.raises(EmptySupportError):
        common_support(g, _cohort(np.zeros(6), W))
    # an interior group-1 unit survives alone
    r1b = np.append(r1, 0.28)
    gb = np.column_stack([r1b, 1 - r1b])
    mask = common_support(gb, _cohort(np.zeros(7), np.append(W, 1)))
    assert mask.eligible.tolist() == [False] * 6 + [True]


def test_identical_gps_excludes_only_extremes():
    base = np.array([0.2, 0.3, 0.4, 0.5])
    r = np.concatenate([base, base, base])
    g = np.column_stack([r, 1 - r])
    W = np.repeat([1, 2, 3], 4)
    g = np.column_stack([g[:, 0] / 2, g[:, 0] / 2, g[:, 1]])
    mask = common_support(g, _cohort(np.zeros(12), W))
    assert mask.eligible.tolist() == [False, True, True, False] * 3


def test_disjoint_groups_have_empty_support():
    r = np.array([0.1, 0.2, 0.7, 0.8])
    g = np.column_stack([r, 1 - r])
    with pytest.raises(EmptySupportError):
        common_support(g, _cohort(np.zeros(4), [1, 1, 2, 2]))


def test_support_invariant_to_permutation():
    c = sample_cohort(SimConfig(Z=3, n1=60, b=1.0, P=3), seed=1)
    g = predict_gps(fit_gps(c), c)
    perm = np.random.default_rng(0).permutation(c.n)
    a = common_support(g, c).eligible
    b = common_support(g[perm], c.subset(perm)).eligible
    assert np.array_equal(a[perm], b)


def test_refit_moves_probabilities_little():
    c = sample_cohort(SimConfig(Z=3, n1=667, b=0.25, P=5), seed=4)
    tr = trim_and_refit(c)
    assert 0 < tr.cohort.n < c.n
    before = predict_gps(tr.initial_model, tr.cohort)
    assert np.max(np.abs(before - tr.gps)) < 0.05
    assert np.max(np.abs(tr.gps.sum(axis=1) - 1)) < 1e-10


def test_two_per_group_cohort_cannot_survive_trimming():
    X = np.array([0.0, 1.0, 0.2, 1.2, 0.4, 1.4])
    with pytest.raises(EmptySupportError):
        trim_and_refit(_cohort(X, [1, 1, 2, 2, 3, 3]))
