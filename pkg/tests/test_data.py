import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gpsmatch.data import Cohort, CohortError, CsvSchema, load_cohort, summarize_cohort, write_cohort, write_summary
from gpsmatch.simgen import SimConfig, sample_cohort


def _write(tmp_path, text, name="c.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_letter_labels_map_in_order(abc_cohort):
    c = abc_cohort
    assert (c.n, c.Z, c.P) == (6, 3, 2)
    assert c.labels == ("A", "B", "C")
    assert c.treatments.tolist() == [1, 2, 3, 1, 2, 3]
    assert c.code_of("C") == 3


def test_blank_covariate_cell_names_the_row(tmp_path):
    p = _write(tmp_path, "id,treatment,x1\n1,A,0.1\n2,A,\n3,B,1\n4,B,2\n")
    with pytest.raises(CohortError, match="missing covariate value at row 2"):
        load_cohort(p)


def test_numeric_labels_remap_contiguously(tmp_path):
    p = _write(tmp_path, "id,treatment,x1\n" + "".join(
        f"{i},{w},{i * 0.5}\n" for i, w in enumerate([7, 1, 3, 1, 3, 7])))
    c = load_cohort(p)
    assert c.labels == ("1", "3", "7")
    assert c.treatments.tolist() == [3, 1, 2, 1, 2, 3]
    assert sorted(set(c.treatments.tolist())) == [1, 2, 3]


def test_numeric_labels_sort_by_value_not_text(tmp_path):
    p = _write(tmp_path, "treatment,x\n10,1\n10,2\n9,3\n9,4\n")
    assert load_cohort(p).labels == ("9", "10")


def test_rejects_non_numeric_duplicate_id_and_missing_file(tmp_path):
    with pytest.raises(CohortError, match="non-numeric"):
        load_cohort(_write(tmp_path, "id,treatment,x\n1,A,abc\n2,A,1\n3,B,1\n4,B,1\n"))
    with pytest.raises(CohortError, match="duplicate unit id"):
        load_cohort(_write(tmp_path, "id,treatment,x\n1,A,0\n1,A,1\n3,B,1\n4,B,1\n"))
    with pytest.raises(FileNotFoundError):
        load_cohort(tmp_path / "nope.csv")


def test_schema_selects_columns(tmp_path):
    p = _write(tmp_path, "unit,arm,a,b,out\nu1,X,1,2,0\nu2,X,2,1,1\nu3,Y,0,0,1\nu4,Y,3,3,0\n")
    c = load_cohort(p, CsvSchema(treatment="arm", id="unit", outcome="out", covariates=["b"]))
    assert c.covariate_names == ("b",)
    assert c.ids == ("u1", "u2", "u3", "u4")
    assert c.outcomes.tolist() == [0, 1, 1, 0]


def test_round_trip_is_bitwise(tmp_path):
    c = sample_cohort(SimConfig(Z=3, n1=30, P=3, eta=3.5, df=7), seed=5)
    p = tmp_path / "c.csv"
    write_cohort(c, p)
    c2 = load_cohort(p)
    assert c2.ids == c.ids
    assert np.array_equal(c2.covariates, c.covariates)
    assert np.array_equal(c2.treatments, c.treatments)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.sampled_from(["q", "r", "s", "t"]), min_size=4, max_size=20))
def test_label_remap_is_bijection(labels):
    W = labels + labels  # every present label has >= 2 units
    ids = tuple(str(i) for i in range(len(W)))
    codes = {lab: k for k, lab in enumerate(sorted(set(W)), start=1)}
    c = Cohort(ids, np.zeros((len(W), 1)), np.array([codes[w] for w in W]), labels=tuple(sorted(set(W))))
    assert sorted(set(c.treatments.tolist())) == list(range(1, c.Z + 1))
    assert [c.labels[w - 1] for w in c.treatments] == W


def test_constant_group_has_zero_sd():
    c = Cohort(tuple("abcd"), np.array([[1.0, 2.0]] * 2 + [[3.0, 4.0]] * 2), np.array([1, 1, 2, 2]))
    s = summarize_cohort(c)
    assert np.all(s[0].sds == 0) and np.all(s[1].sds == 0)
    assert s[0].means.tolist() == [1.0, 2.0]
    assert s[1].means.tolist() == [3.0, 4.0]


def test_simulated_group_means_near_zero():
    hits = 0
    reps = 40
    for seed in range(reps):
        c = sample_cohort(SimConfig(Z=3, n1=67, P=3), seed=seed)  # n = 201
        ok = all(np.all(np.abs(g.means) < 4 / np.sqrt(g.n)) for g in summarize_cohort(c))
        hits += ok
    assert hits / reps >= 0.95


def test_summary_csv_layout(tmp_path, abc_cohort):
    p = tmp_path / "s.csv"
    write_summary(abc_cohort, p)
    lines = p.read_text().splitlines()
    assert lines[0] == "group,n,x1_mean,x1_sd,x2_mean,x2_sd"
    assert lines[1] == "A,2,0.0000,0.7071,1.5000,0.7071"
