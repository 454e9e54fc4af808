import subprocess
import sys

import numpy as np
import pytest

from pairmmd import __version__
from pairmmd import io as pio
from pairmmd.cli import main, replay_argv
from pairmmd.data import from_arrays

SMALL = ["--n1", "12", "--n2", "8", "--n3", "8", "--n", "30", "--bootstrap", "40"]


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


def simulate(*extra, out="table.csv"):
    return main(["simulate", "--rho", "0", "--reps", "4", "--seed", "7", *SMALL,
                 "--out", out, *extra])


def report(path):
    return pio.parse_report(open(path).read())


def test_simulate_twice_identical(workdir, capsys):
    assert simulate("--emit-dataset", "a.csv", out="t1.csv") == 0
    first = capsys.readouterr().out
    assert simulate("--emit-dataset", "b.csv", out="t2.csv") == 0
    second = capsys.readouterr().out
    assert (workdir / "t1.csv").read_bytes() == (workdir / "t2.csv").read_bytes()
    assert (workdir / "a.csv").read_bytes() == (workdir / "b.csv").read_bytes()
    assert first.replace("t1.csv", "X").replace("a.csv", "Y") == \
        second.replace("t2.csv", "X").replace("b.csv", "Y")


def test_missing_input(workdir, capsys):
    assert main(["test-mcar", "--input", "missing.csv"]) == 2
    err = capsys.readouterr().err.strip()
    assert "missing.csv" in err and "\n" not in err


def test_unknown_flag(capsys):
    assert main(["test-mcar", "--input", "x.csv", "--frobnicate"]) == 2
    assert len(capsys.readouterr().err.strip().splitlines()) == 1


def test_bad_row_has_line(workdir, capsys):
    (workdir / "bad.csv").write_text("id,timepoint,x\n1,1,0.5\n1,2,abc\n")
    assert main(["test-mcar", "--input", "bad.csv"]) == 2
    assert "bad.csv:3" in capsys.readouterr().err


def test_constant_dataset(workdir):
    ds = from_arrays(np.full(4, 2.0), np.full(4, 2.0), np.full(3, 2.0), np.full(3, 2.0))
    pio.write_dataset(ds, "const.csv")
    code = main(["test-mcar", "--input", "const.csv", "--bandwidth", "1.0",
                 "--bootstrap", "50", "--report", "r.txt"])
    assert code == 0
    assert "result.p_value=1.0\n" in (workdir / "r.txt").read_text()


def test_round_trip(workdir):
    assert simulate("--scenario", "mar", "--emit-dataset", "mar.csv",
                    "--emit-covariates", "cov.csv") == 0
    assert simulate("--emit-dataset", "mcar.csv") == 0
    assert main(["test-mcar", "--input", "mcar.csv", "--bootstrap", "30",
                 "--report", "m.txt"]) == 0
    assert main(["test-mar", "--input", "mar.csv", "--covariates", "cov.csv",
                 "--bootstrap", "30", "--report", "a.txt"]) == 0
    assert main(["cluster", "--input", "mar.csv", "--covariates", "cov.csv", "--k", "2",
                 "--out", "cl.csv", "--report", "c.txt"]) == 0
    rep = report("a.txt")
    assert rep["result.logistic_features"] == "y1;y2"
    assert 0.0 <= float(rep["result.p_value"]) <= 1.0
    assert (workdir / "cl.csv.curves.csv").exists()
    assert (workdir / "m.txt.replicas.csv").exists()
    assert (workdir / "m.txt.timing").read_text().startswith("wall_seconds=")
    # every defaulted flag is echoed
    mrep = report("m.txt")
    for key in ("alpha", "l-param", "bandwidth", "seed", "metric", "plus-one"):
        assert f"config.{key}" in mrep


def test_replay(workdir):
    assert simulate("--emit-dataset", "d.csv") == 0
    assert main(["test-mcar", "--input", "d.csv", "--bootstrap", "30", "--seed", "3",
                 "--report", "r1.txt"]) == 0
    assert main(["replay", "r1.txt", "--report", "r2.txt"]) == 0
    assert (workdir / "r1.txt").read_bytes() == (workdir / "r2.txt").read_bytes()
    argv = replay_argv((workdir / "r1.txt").read_text())
    assert argv[0] == "test-mcar" and "--seed" in argv


def test_replay_bad_report(workdir):
    (workdir / "junk.txt").write_text("command=nope\n")
    assert main(["replay", "junk.txt"]) == 2


def test_kde(workdir, capsys):
    (workdir / "s.csv").write_text("glucose\n" + "".join(f"{v}\n" for v in
                                                         np.linspace(80, 160, 41)))
    assert main(["kde", "--input", "s.csv", "--out", "dens.csv", "--quantiles", "q.csv",
                 "--grid-size", "256"]) == 0
    rep = pio.parse_report(capsys.readouterr().out)
    assert float(rep["result.integral"]) == pytest.approx(1.0, abs=0.01)
    assert len((workdir / "q.csv").read_text().splitlines()) == 101


def test_metric_mismatch(workdir, capsys):
    assert simulate("--emit-dataset", "d.csv") == 0
    assert main(["test-mcar", "--input", "d.csv", "--metric", "euclidean"]) == 2


def test_version(capsys):
    assert main(["--version"]) == 0
    out = capsys.readouterr().out
    assert out.startswith(f"pairmmd {__version__}") and "interface" in out


def test_entry_point(workdir):
    proc = subprocess.run([sys.executable, "-m", "pairmmd.cli", "test-mcar", "--input",
                           "nothere.csv"], capture_output=True, text=True)
    assert proc.returncode == 2 and "nothere.csv" in proc.stderr
