import json

import pytest

from cwotce.cli import main


@pytest.fixture
def patients(tmp_path):
    path = tmp_path / "p.csv"
    assert main(["simulate", "--scenario", "UNI-L", "--n-per-arm", "40", "--rep", "2",
                 "--seed", "11", "--out", str(path)]) == 0
    return path


def test_simulate_is_reproducible(tmp_path, patients):
    again = tmp_path / "q.csv"
    main(["simulate", "--scenario", "UNI-L", "--n-per-arm", "40", "--rep", "2", "--seed", "11",
          "--out", str(again)])
    assert again.read_bytes() == patients.read_bytes()


def test_list_scenarios(capsys):
    assert main(["simulate", "--list-scenarios"]) == 0
    reg = json.loads(capsys.readouterr().out)
    assert len(reg) == 20 and reg["COR-H"]["theta"] == 4.0


@pytest.mark.parametrize("method", ["cwot", "cox", "wr", "wlw"])
def test_analyze_methods(method, patients, capsys):
    assert main(["analyze", str(patients), "--method", method, "--B", "99", "--seed", "3"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["method"] == method
    assert 0 < out["p_value"] <= 1
    if method == "cwot":
        assert {"cbi", "cor", "ci", "attribution"} <= out.keys()
        assert len(out["attribution"]["components"]) == 6
    if method == "wr":
        assert 0 <= out["tie_rate"] <= 1


def test_analyze_count5_and_months(tmp_path, capsys):
    path = tmp_path / "m.csv"
    path.write_text("id,arm,followup_time,death_observed,event_times,biomarker\n"
                    "a,1,36,0,6;12;18,1.0\nb,1,30,1,,\nc,0,36,0,30;33;35,0.5\nd,0,12,1,6,\n")
    assert main(["analyze", str(path), "--mode", "count5", "--time-unit", "months",
                 "--B", "19", "--seed", "1"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["mode"] == "count5" and len(out["attribution"]["components"]) == 5


def test_analyze_requires_seed_for_permutations(patients):
    with pytest.raises(SystemExit):
        main(["analyze", str(patients), "--method", "cwot"])


def test_validate_measure(tmp_path, capsys):
    good = tmp_path / "good.json"
    good.write_text(json.dumps({"k": 2, "weights": [0.5, 0.5], "interactions": []}))
    assert main(["validate-measure", str(good)]) == 0
    assert "FAIL" not in capsys.readouterr().out
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"k": 2, "weights": [0.05, 0.95],
                               "interactions": [{"i": 1, "j": 2, "value": -0.2}]}))
    assert main(["validate-measure", str(bad)]) == 1
    out = capsys.readouterr().out
    assert "FAIL  monotonicity" in out and "component 1" in out


def test_sweep_and_report(tmp_path, capsys):
    out_dir = tmp_path / "run"
    assert main(["sweep", "--scenarios", "NULL-S,UNI-L", "--methods", "cwot_block6,cox",
                 "--reps", "2", "--B", "19", "--n-per-arm", "30", "--no-runtime",
                 "--out", str(out_dir)]) == 0
    assert (out_dir / "raw.csv").exists() and (out_dir / "run_manifest.json").exists()
    capsys.readouterr()
    assert main(["report", str(out_dir), "--alpha", "0.10", "--out", str(tmp_path / "rep")]) == 0
    assert "| UNI-L | cox |" in capsys.readouterr().out
    assert (tmp_path / "rep" / "plots" / "power_by_n.csv").exists()


def test_report_schema_error(tmp_path, capsys):
    bad = tmp_path / "raw.csv"
    bad.write_text("nope\n")
    assert main(["report", str(bad)]) == 2
    assert "error" in capsys.readouterr().err
