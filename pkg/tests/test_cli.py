import csv
import json
import math

import pytest

from halfheat.cli import EXIT_FIT, EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, fmt, main


def _csv_rows(path):
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def test_mn_json(tmp_path):
    out = tmp_path / "m1.json"
    assert main(["mn", "1", "--out", str(out)]) == EXIT_OK
    d = json.loads(out.read_text())
    for key in ("n", "sup_f1", "sup_f2", "Mn", "cnMn", "p_star", "err_est", "argsup_f1", "argsup_f2", "config"):
        assert key in d
    assert d["Mn"] == pytest.approx(4.8271, abs=5e-3)
    assert d["argsup_f1"] == "inf"


def test_mn_five_has_no_p_star(tmp_path):
    out = tmp_path / "m5.json"
    assert main(["mn", "5", "--out", str(out)]) == EXIT_OK
    assert json.loads(out.read_text())["p_star"] is None


def test_mn_alpha_one_half_matches(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    main(["mn", "1", "--out", str(a)])
    main(["mn", "1", "--alpha", "0.5", "--out", str(b)])
    assert json.loads(a.read_text())["Mn"] == pytest.approx(json.loads(b.read_text())["Mn"], abs=1e-3)


def test_gaussian_order_is_a_numerical_failure(tmp_path):
    assert main(["mn", "1", "--alpha", "1.0", "--out", str(tmp_path / "g.json")]) == EXIT_NUMERIC


def test_usage_errors(tmp_path, capsys):
    assert main(["mn", "7"]) == EXIT_USAGE
    assert main(["mn", "1", "--alpha", "1.5"]) == EXIT_USAGE
    with pytest.raises(SystemExit) as exc:
        main(["verify", "--suite", "bogus"])
    assert exc.value.code == EXIT_USAGE
    with pytest.raises(SystemExit) as exc:
        main(["mn", "one"])
    assert exc.value.code == EXIT_USAGE
    assert main(["simulate", "--n", "2", "--p", "2", "--amp", "1", "--out", str(tmp_path)]) == EXIT_USAGE
    assert main(["simulate", "--p", "2", "--amp", "1", "--N", "1000", "--out", str(tmp_path)]) == EXIT_USAGE


def test_table_csv(tmp_path):
    out = tmp_path / "t.csv"
    assert main(["table", "--out", str(out)]) == EXIT_OK
    text = out.read_text()
    assert text.startswith("# halfheat")
    rows = _csv_rows(out)
    assert [int(r["n"]) for r in rows] == [1, 2, 3, 4, 5]
    assert float(rows[0]["p_star"]) == pytest.approx(4.2072, abs=1e-3)
    assert float(rows[1]["cnMn"]) == pytest.approx(2.1498, abs=1e-2)
    assert rows[4]["p_star"] == ""


def test_fmt():
    assert fmt(None) == ""
    assert fmt(3) == "3"
    assert float(fmt(math.pi)) == math.pi
    assert fmt(0.1) == "0.10000000000000001"
    assert fmt(True) == "true"


@pytest.mark.parametrize("suite", ["pohozaev", "energy"])
def test_verify_suites(suite, capsys):
    assert main(["verify", "--suite", suite]) == EXIT_OK
    out = capsys.readouterr().out
    assert "FAIL" not in out and "PASS" in out


def test_simulate_no_blowup(tmp_path):
    d = tmp_path / "run"
    args = ["simulate", "--p", "2", "--amp", "0.01", "--L", "16", "--N", "256", "--t-max", "5", "--out", str(d)]
    assert main(args) == EXIT_OK
    rep = json.loads((d / "rate.json").read_text())
    assert rep["blew_up"] is False and rep["classification"] == "ZERO"
    assert rep["config"].startswith("halfheat")
    assert (d / "trajectory.csv").read_text().startswith("# halfheat")
    rows = _csv_rows(d / "trajectory.csv")
    assert float(rows[-1]["t"]) == pytest.approx(5.0)


def test_simulate_is_reproducible(tmp_path):
    outs = []
    for k in range(2):
        d = tmp_path / f"r{k}"
        main(["simulate", "--p", "2", "--amp", "5", "--L", "32", "--N", "1024", "--out", str(d)])
        outs.append({name: (d / name).read_text().split("\n", 1)[1]
                     for name in ("trajectory.csv", "energy_trace.csv")})
        outs[-1]["rate"] = {k2: v for k2, v in json.loads((d / "rate.json").read_text()).items() if k2 != "config"}
    assert outs[0] == outs[1]
    rate = outs[0]["rate"]
    assert rate["blew_up"] and rate["classification"] == "PLUS"
    assert rate["amplitude_limit"] == pytest.approx(1.0, rel=0.1)
    assert rate["monotone"] is True


def test_simulate_fit_failure(tmp_path):
    # a threshold just above the data leaves too few decades to fit
    args = ["simulate", "--p", "2", "--amp", "5", "--L", "16", "--N", "256", "--threshold", "20",
            "--out", str(tmp_path / "f")]
    assert main(args) == EXIT_FIT
