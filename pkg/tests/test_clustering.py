import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gpsmatch.clustering import (
    FuzzyClustering,
    fcm_memberships,
    fuzzy_cmeans,
    hard_sets,
    kmeans,
    threshold_assign,
)
from oracles import label_partition


@pytest.fixture
def tight_pair(fixtures_dir):
    return np.loadtxt(fixtures_dir / "fuzzy10.csv", delimiter=",", skiprows=1)


def _fuzzy(U):
    U = np.asarray(U, dtype=float)
    return FuzzyClustering(U, np.zeros((U.shape[1], 1)), 0.0, 2.0)


def test_point_masses_separate_exactly():
    V = np.array([-10.0] * 6 + [10.0] * 4)
    hc = kmeans(V, 2, seed=1)
    assert label_partition(hc.assignment) == frozenset({frozenset(range(6)), frozenset(range(6, 10))})
    assert hc.inertia == 0.0


def test_single_cluster_is_grand_mean():
    V = np.random.default_rng(0).normal(size=(30, 2))
    hc = kmeans(V, 1)
    assert np.all(hc.assignment == 0)
    assert np.allclose(hc.centers[0], V.mean(axis=0))
    assert np.isclose(hc.inertia, np.sum((V - V.mean(axis=0)) ** 2))


def test_one_cluster_per_point():
    V = np.random.default_rng(1).normal(size=(8, 2))
    hc = kmeans(V, 8)
    assert hc.inertia == 0.0
    assert sorted(hc.assignment.tolist()) == list(range(8))
    assert np.allclose(hc.centers[hc.assignment], V)


def test_kmeans_rejects_too_many_clusters():
    with pytest.raises(ValueError):
        kmeans(np.zeros(3), 4)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 6))
def test_inertia_never_increases(seed, K):
    V = np.random.default_rng(seed).normal(size=(60, 2))
    V[:20] += 3
    path = np.array(kmeans(V, K, seed=seed, n_restarts=1).inertia_path)
    assert np.all(np.diff(path) <= 0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 5), st.sampled_from([1.5, 2.0, 3.0]))
def test_fuzzy_objective_never_increases(seed, K, m):
    V = np.random.default_rng(seed).normal(size=(50, 2))
    V[:25] += 2.5
    path = np.array(fuzzy_cmeans(V, K, m=m, seed=seed).objective_path)
    assert np.all(np.diff(path) <= 0)


def test_equidistant_point_splits_evenly():
    U = fcm_memberships(np.array([[0.0]]), np.array([[-1.0], [1.0]]), 2.0)
    assert np.allclose(U, [[0.5, 0.5]])


def test_point_on_center_gets_full_membership():
    U = fcm_memberships(np.array([[1.0], [0.2]]), np.array([[-1.0], [1.0], [3.0]]), 2.0)
    assert U[0].tolist() == [0.0, 1.0, 0.0]
    assert np.isclose(U[1].sum(), 1.0)


def test_two_tight_clusters_are_nearly_hard(tight_pair):
    fc = fuzzy_cmeans(tight_pair, 2, m=2.0, seed=0)
    left = tight_pair[:, 0] < 0
    own = fc.membership[np.arange(10), np.argmax(fc.membership, axis=1)]
    assert np.all(own > 0.95)
    # dominant cluster agrees with the side of the point
    assert label_partition(np.argmax(fc.membership, axis=1)) == label_partition(left)


def test_lower_exponent_hardens_memberships(tight_pair):
    soft = fuzzy_cmeans(tight_pair, 2, m=2.0, seed=0).membership.max(axis=1)
    hard = fuzzy_cmeans(tight_pair, 2, m=1.05, seed=0).membership.max(axis=1)
    assert np.all(hard > soft)


def test_translation_does_not_change_partitions(tight_pair):
    shift = np.array([123.0, -45.0])
    a = kmeans(tight_pair, 2, seed=3).assignment
    b = kmeans(tight_pair + shift, 2, seed=3).assignment
    assert label_partition(a) == label_partition(b)
    fa = np.argmax(fuzzy_cmeans(tight_pair, 2, seed=3).membership, axis=1)
    fb = np.argmax(fuzzy_cmeans(tight_pair + shift, 2, seed=3).membership, axis=1)
    assert label_partition(fa) == label_partition(fb)


def test_uniform_memberships_join_every_set():
    assert threshold_assign(_fuzzy(np.full((4, 3), 1 / 3))).all()


def test_one_hot_memberships_form_a_partition():
    U = np.eye(3)[[0, 2, 1, 2]]
    S = threshold_assign(_fuzzy(U))
    assert np.array_equal(S, U.astype(bool))
    assert np.array_equal(S, hard_sets(np.array([0, 2, 1, 2]), 3))


def test_threshold_uses_one_over_k():
    S = threshold_assign(_fuzzy([[0.5, 0.4, 0.1]]))
    assert S.tolist() == [[True, True, False]]


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 6))
def test_every_unit_lands_in_some_set(seed, K):
    V = np.random.default_rng(seed).normal(size=(25, 2))
    S = threshold_assign(fuzzy_cmeans(V, K, seed=seed))
    assert np.all(S.sum(axis=1) >= 1)


def test_same_seed_same_result():
    V = np.random.default_rng(7).normal(size=(40, 3))
    a, b = kmeans(V, 4, seed=9), kmeans(V, 4, seed=9)
    assert np.array_equal(a.assignment, b.assignment) and a.inertia == b.inertia
    fa, fb = fuzzy_cmeans(V, 4, seed=9), fuzzy_cmeans(V, 4, seed=9)
    assert np.array_equal(fa.membership, fb.membership)
