import csv
import subprocess
import sys

import pytest

from kpme.cli import main


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_run_with_oracle(tmp_path):
    out, summ = tmp_path / "out.csv", tmp_path / "sum.csv"
    argv = "run --particles 64 --modes 2 --order 8 --cells 1,1,1 --xi 3 --quad sinc --eps 1e-10 --seed 7 --oracle"
    assert main(argv.split() + ["--output", str(out), "--summary", str(summ)]) == 0
    rows = read_csv(out)
    assert len(rows) == 64 and list(rows[0]) == ["index", "x", "y", "z", "q", "potential"]
    s = read_csv(summ)[0]
    assert s["K"] == "1x1x1" and float(s["err_vs_oracle"]) <= 1e-5


def test_run_is_deterministic(tmp_path):
    paths = [tmp_path / f"o{i}.csv" for i in range(2)]
    for p in paths:
        assert main(["run", "--cells", "2", "--particles", "30", "--seed", "3", "--output", str(p), "--summary", "-"]) == 0
    assert paths[0].read_text() == paths[1].read_text()


def test_zero_particles(tmp_path):
    out = tmp_path / "o.csv"
    assert main(["run", "--particles", "0", "--output", str(out), "--summary", str(tmp_path / "s.csv")]) == 0
    assert read_csv(out) == []


def test_input_file_and_ledger(tmp_path):
    cloud = tmp_path / "cloud.txt"
    cloud.write_text("3\n0 0 0 1\n0.01 0.02 0 -1\n-0.02 0.01 0.03 0.5\n")
    ledger = tmp_path / "l.csv"
    rc = main(["run", "--input", str(cloud), "--cells", "2,1,1", "--ledger", str(ledger),
               "--output", str(tmp_path / "o.csv"), "--summary", str(tmp_path / "s.csv")])
    assert rc == 0
    rows = read_csv(ledger)
    assert {r["rank"] for r in rows} == {"0", "1"}


def test_exit_codes(tmp_path, capsys):
    assert main(["run", "--input", str(tmp_path / "missing.txt")]) == 2
    assert main(["run", "--order", "1"]) == 1
    assert main(["run", "--quad", "tab", "--modes", "13", "--output", str(tmp_path / "o.csv")]) == 1
    with pytest.raises(SystemExit) as info:
        main(["run", "--cells", "0,1,1"])
    assert info.value.code == 1
    assert main(["run", "--particles", "-3"]) == 1


def test_numerical_failure_exit_code(monkeypatch, tmp_path):
    from kpme import cli
    from kpme.alphaskp import NumericalFailure

    def boom(*a, **k):
        raise NumericalFailure("no convergence")

    monkeypatch.setattr(cli, "nkpa_svd", boom)
    assert main(["run", "--quad", "svd", "--output", str(tmp_path / "o.csv")]) == 3


def test_warnings_for_ratio_and_order(tmp_path, caplog):
    out = ["--output", str(tmp_path / "o.csv"), "--summary", str(tmp_path / "s.csv")]
    assert main(["run", "--particles", "5", "--nu", "1.5", "--order", "11", "--eps", "1e-4"] + out) == 0
    text = caplog.text
    assert "convergence ratio" in text and "order 11" in text


def test_compression_svd_bound(tmp_path):
    out = tmp_path / "c.csv"
    assert main(["compression", "--modes", "1:5", "--eps", "1e-4,1e-8", "--output", str(out)]) == 0
    rows = read_csv(out)
    assert len(rows) == 10
    assert all(int(r["terms"]) <= (2 * int(r["M"]) + 1) ** 2 for r in rows)


def test_compression_tabulated(tmp_path):
    out = tmp_path / "c.csv"
    assert main(["compression", "--kind", "tab", "--modes", "12,13", "--eps", "1e-14", "--output", str(out)]) == 0
    rows = read_csv(out)
    assert len(rows) == 1 and rows[0]["M"] == "12" and rows[0]["terms"] == "27"
    assert float(rows[0]["relative_rank"]) == pytest.approx(27 / 625)


def test_convergence_monotone_in_nu(tmp_path):
    out = tmp_path / "v.csv"
    assert main(["convergence", "--modes", "4", "--orders", "2:6", "--particles", "40", "--output", str(out)]) == 0
    rows = read_csv(out)
    err = {(float(r["nu"]), int(r["L"])): float(r["rel_error"]) for r in rows}
    for L in range(2, 7):
        assert err[(0.125, L)] < err[(0.5, L)]


def test_scaling_shapes(tmp_path):
    out = tmp_path / "s.csv"
    assert main(["scaling", "--shapes", "1,1,1;2,2,2;4,2,1", "--particles", "60", "--output", str(out)]) == 0
    rows = read_csv(out)
    assert [r["shape"] for r in rows] == ["1x1x1", "2x2x2", "4x2x1"]
    assert all(float(r["gathered_error"]) <= 1e-12 for r in rows)
    assert len({r["reductions"] for r in rows}) == 1


def test_console_script_help():
    res = subprocess.run([sys.executable, "-m", "kpme.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "convergence" in res.stdout
