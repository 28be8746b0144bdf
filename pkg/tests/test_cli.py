import subprocess
import sys
import time

import numpy as np
import pytest

from gpsmatch.balance import read_balance
from gpsmatch.cli import main
from gpsmatch.data import Cohort, write_cohort
from gpsmatch.simgen import SimConfig, sample_cohort


@pytest.fixture
def cohort_csv(tmp_path):
    c = sample_cohort(SimConfig(Z=3, n1=80, b=0.5, P=3), seed=1)
    rng = np.random.default_rng(0)
    y = c.covariates.sum(axis=1) + (c.treatments == 1) + rng.normal(size=c.n)
    labelled = Cohort(c.ids, c.covariates, c.treatments, outcomes=y, labels=("ctl", "low", "high"),
                      covariate_names=c.covariate_names or ("x1", "x2", "x3"))
    path = tmp_path / "cohort.csv"
    write_cohort(labelled, path)
    return path


def test_grid_count(capsys):
    t0 = time.perf_counter()
    assert main(["grid", "--which", "z35", "--count"]) == 0
    assert time.perf_counter() - t0 < 1
    assert capsys.readouterr().out.strip() == "10368"
    assert main(["grid", "--which", "z10", "--count"]) == 0
    assert capsys.readouterr().out.strip() == "36"


def test_match_writes_three_outputs(tmp_path, cohort_csv):
    out = tmp_path / "out"
    assert main(["match", str(cohort_csv), "--algorithm", "GPSnc", "--reference", "auto", "--out", str(out)]) == 0
    for name in ("matched.csv", "balance.csv", "estimates.csv"):
        assert (out / name).is_file()
    assert (out / "matched.manifest").read_text().startswith("algorithm=GPSnc\n")
    assert read_balance(out / "balance.csv")["summary"][0]["prop_matched"] == "1.0000"


def test_balance_of_matched_file_equals_match_output(tmp_path, cohort_csv):
    out = tmp_path / "out"
    assert main(["match", str(cohort_csv), "--algorithm", "KM", "--reference", "low", "--clusters", "3",
                 "--seed", "5", "--out", str(out)]) == 0
    assert main(["balance", str(cohort_csv), "--matched", str(out / "matched.csv"),
                 "--out", str(tmp_path / "again.csv")]) == 0
    assert (tmp_path / "again.csv").read_text() == (out / "balance.csv").read_text()


def test_prematched_balance(tmp_path, cohort_csv):
    assert main(["balance", str(cohort_csv), "--out", str(tmp_path / "pre.csv")]) == 0
    assert read_balance(tmp_path / "pre.csv")["summary"][0]["prop_matched"] == "nan"


def test_simulate(tmp_path):
    man = tmp_path / "run.txt"
    man.write_text("n1=40\np=3\nalgorithms=VM,GPSnc\n")
    assert main(["simulate", str(man), "--replications", "2", "--out", str(tmp_path / "sim")]) == 0
    assert len((tmp_path / "sim" / "raw.csv").read_text().splitlines()) == 1 + 2 * 3


def test_zero_replications_is_a_usage_error(tmp_path, capsys):
    man = tmp_path / "run.txt"
    man.write_text("n1=40\n")
    with pytest.raises(SystemExit) as e:
        main(["simulate", str(man), "--replications", "0"])
    assert e.value.code == 2
    man.write_text("replications=0\n")
    with pytest.raises(SystemExit) as e:
        main(["simulate", str(man)])
    assert e.value.code == 2
    assert "usage" in capsys.readouterr().err


def test_unknown_flag_and_subcommand():
    for argv in (["grid", "--bogus"], ["frobnicate"]):
        with pytest.raises(SystemExit) as e:
            main(argv)
        assert e.value.code == 2


def test_job_errors_exit_one(tmp_path, capsys):
    assert main(["match", str(tmp_path / "missing.csv")]) == 1
    bad = tmp_path / "bad.csv"
    bad.write_text("id,treatment,x1\n1,A,1\n2,A,\n3,B,2\n4,B,3\n")
    assert main(["match", str(bad)]) == 1
    assert "missing covariate value at row 2" in capsys.readouterr().err


def test_console_entry_point():
    r = subprocess.run([sys.executable, "-m", "gpsmatch", "grid", "--which", "z10", "--count"],
                       capture_output=True, text=True, check=True)
    assert r.stdout.strip() == "36"
