import csv
import io
import json

import pytest

from wicklab.cli import CONVERGE_COLUMNS, run
from wicklab.funcgrid import load_csv, sample


def run_json(tmp_path, argv, name="out.json"):
    out = tmp_path / name
    code = run(argv + ["--out", str(out)])
    return code, json.loads(out.read_text()) if out.exists() else None


def test_moments_all_engines(tmp_path):
    code, data = run_json(tmp_path, ["moments", "--n", "8", "--factor", "x^2:2", "--factor", "1:2", "--engine", "all"])
    assert code == 0
    v = data["values"]
    assert v["formula"] == pytest.approx(v["bruteforce"], rel=1e-12)
    assert abs(v["mc"]["mean"] - v["bruteforce"]) < 4 * v["mc"]["se"]
    assert data["config"]["factors"] == [["x^2", 2], ["1.0", 2]]
    assert "timings" not in data


def test_moments_single_engine(tmp_path):
    code, data = run_json(tmp_path, ["moments", "--n", "4", "--factor", "1:4", "--engine", "formula"])
    assert code == 0
    assert data["values"] == {"formula": pytest.approx(1.0 * 3 - 2 * 4 / 16)}


def test_diagrams_dump(tmp_path):
    code, data = run_json(tmp_path, ["diagrams", "--n", "2", "--wick", "1:3", "--wick", "1:1"])
    assert code == 0
    assert data["total"] == pytest.approx(-1.0)
    assert data["values"]["oracle"] == pytest.approx(-1.0)
    assert data["values"]["gaussian"] == 0.0
    assert data["term_count"] == 6
    assert all(t["blocks"] == [[1, 2, 3, 4]] for t in data["terms"])


def test_diagrams_example_has_eight_terms(tmp_path):
    code, data = run_json(tmp_path, ["diagrams", "--n", "2", "--wick", "1:2", "--wick", "1:2", "--engine", "traversal"])
    assert code == 0
    assert data["term_count"] == 8
    assert data["total"] == pytest.approx(1.0)


def test_converge_csv(tmp_path):
    out = tmp_path / "c.csv"
    argv = ["converge", "--wick", "sin(3*x):2", "--wick", "x:2", "--grid", "8,16,32,64", "--format", "csv"]
    assert run(argv + ["--out", str(out)]) == 0
    rows = list(csv.DictReader(io.StringIO(out.read_text())))
    assert list(rows[0]) == CONVERGE_COLUMNS
    errs = [float(r["abs_error"]) for r in rows]
    assert all(1.6 <= a / b <= 2.4 for a, b in zip(errs, errs[1:]))


def test_outputs_are_byte_identical(tmp_path):
    argv = ["moments", "--n", "6", "--factor", "x:2", "--engine", "all", "--samples", "5000", "--seed", "9"]
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert run(argv + ["--out", str(a)]) == 0
    assert run(argv + ["--out", str(b), "--workers", "1"]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_wick_command(tmp_path):
    code, data = run_json(tmp_path, ["wick", "--degree", "4", "--base", "bernoulli", "--alpha", "1", "--series", "40"])
    assert code == 0
    assert data["coefficients"] == [5.0, 0.0, -6.0, 0.0, 1.0]
    assert data["stochastic_exponent"]["partial_sum"] == pytest.approx(1.761594, abs=1e-6)
    code, data = run_json(tmp_path, ["wick", "--degree", "3", "--n", "2", "--expr", "1"], "b.json")
    assert data["coefficients"] == pytest.approx([0.0, -3.0, 0.0, 1.0])


def test_hermite_command(tmp_path):
    argv = ["hermite", "--grid", "16,32", "--samples", "2000", "--exact-gram", "--format", "csv"]
    out = tmp_path / "h.csv"
    assert run(argv + ["--out", str(out)]) == 0
    rows = list(csv.DictReader(io.StringIO(out.read_text())))
    assert [int(r["n"]) for r in rows] == [16, 32]
    assert float(rows[0]["second_limit"]) == pytest.approx(1.0)


def test_sample_round_trip(tmp_path):
    out = tmp_path / "g.csv"
    assert run(["sample", "--n", "5", "--expr", "x1*x2", "--arity", "2", "--format", "csv", "--out", str(out)]) == 0
    assert load_csv(out) == sample("x1*x2", 5, 2)
    code, data = run_json(tmp_path, ["sample", "--csv-in", str(out)])
    assert code == 0 and data["arity"] == 2


def test_verify_subset(tmp_path, capsys):
    code, data = run_json(tmp_path, ["verify", "--only", "1,4,8"])
    assert code == 0
    assert data["passed"] is True
    assert [c["criterion"] for c in data["criteria"]] == [1, 4, 8]
    assert "PASS" in capsys.readouterr().out


def test_parse_error_exit(capsys):
    assert run(["moments", "--n", "4", "--factor", "x +:2"]) == 2
    assert "offset" in capsys.readouterr().err


def test_bad_factor_syntax_exits_two():
    with pytest.raises(SystemExit) as exc:
        run(["moments", "--n", "4", "--factor", "x"])
    assert exc.value.code == 2


def test_missing_factor_exit():
    assert run(["moments", "--n", "4"]) == 2


def test_capacity_exit():
    assert run(["diagrams", "--n", "2", "--wick", "1:10", "--wick", "x:10"]) == 3
    assert run(["moments", "--n", "25", "--factor", "x:2", "--engine", "bruteforce"]) == 3


def test_io_exit(tmp_path):
    target = tmp_path / "missing" / "out.json"
    assert run(["sample", "--n", "2", "--expr", "x", "--out", str(target)]) == 4
    assert run(["sample", "--csv-in", str(tmp_path / "nope.csv")]) == 4


def test_csv_not_offered_for_moments():
    assert run(["moments", "--n", "2", "--factor", "x:2", "--format", "csv"]) == 2


def test_timings_flag(tmp_path):
    code, data = run_json(tmp_path, ["moments", "--n", "3", "--factor", "x:2", "--engine", "formula", "--timings"])
    assert code == 0 and "formula" in data["timings"]
