import csv
import io
import json

import pytest

from cylstable.cli import build_parser, main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_parser_lists_subcommands():
    text = build_parser().format_help()
    for cmd in ("experiment", "check-irreducible", "check-hgamma", "fraclap", "survival", "exit-time",
                "exit-dist", "green", "heatkernel", "lambda1", "bound-ratio"):
        assert cmd in text


def test_fraclap_json(capsys):
    code, out, _ = run(capsys, "fraclap", "--alpha", "1.5", "--p", "1.2", "--x", "2")
    data = json.loads(out)
    assert code == 0 and data["sign"] == 1
    assert data["value"] == pytest.approx(data["constant"] * 2 ** (1.2 - 1.5))
    assert data["rel_diff"] < 1e-6


def test_check_commands(capsys):
    code, out, _ = run(capsys, "check-irreducible", "--domain", "diagonal_balls_6_3")
    assert code == 0 and json.loads(out)["n_components"] == 2
    code, out, _ = run(capsys, "check-hgamma", "--domain", "tilted_rect_6_2", "--pairs", "500", "--seed", "1")
    data = json.loads(out)
    assert data["hgamma_holds"] is False and data["counterexample"]["x"]


def test_unknown_domain_is_an_error(capsys):
    code, _, err = run(capsys, "check-irreducible", "--domain", "no_such_shape")
    assert code == 2 and "error" in err


def test_survival_csv_columns(capsys):
    code, out, _ = run(capsys, "survival", "--x", "0.2,0", "--t", "0.2", "--paths", "500", "--refine", "2")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0
    assert list(rows[0]) == ["quantity", "estimate", "stderr", "dt", "n_paths", "seed"]
    assert [r["dt"] for r in rows[:2]] == ["0.001", "0.0005"]
    assert rows[-1]["quantity"] == "survival_richardson"


def test_exit_time_trace(capsys, tmp_path):
    import numpy as np

    trace = tmp_path / "p.npy"
    code, out, _ = run(capsys, "exit-time", "--paths", "300", "--trace", str(trace))
    assert code == 0 and trace.exists()
    arr = np.load(trace)
    assert arr.shape[1] == 3 and arr[0, 0] == 0.0


def test_exit_dist_and_green(capsys):
    code, out, _ = run(capsys, "exit-dist", "--paths", "400", "--t", "0.3")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and rows[0]["quantity"] == "exit_fraction"
    code, out, _ = run(capsys, "green", "--paths", "200", "--t", "0.2", "--mesh-h", "0.5")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and rows[0]["quantity"] == "total_occupation"


def test_heatkernel_json(capsys):
    code, out, _ = run(capsys, "heatkernel", "--method", "sub", "--t", "0.3", "--x", "0,0", "--y", "0.2,0",
                       "--paths", "2000", "--seed", "4")
    data = json.loads(out)
    assert code == 0 and data["method"] == "subtraction"
    assert set(data) >= {"value", "stderr", "method", "params"}
    assert data["params"]["seed"] == 4


def test_lambda1_and_bound_ratio_write_files(capsys, tmp_path):
    code, out, _ = run(capsys, "lambda1", "--start", "0,0", "--start", "0.3,0", "--paths", "3000",
                       "--boot", "5", "--out", str(tmp_path / "l"))
    assert code == 0 and (tmp_path / "l" / "lambda1.csv").exists() and (tmp_path / "l" / "lambda1.svg").exists()
    code, out, _ = run(capsys, "bound-ratio", "--times", "0.1,0.2", "--pair", "0,0;0.3,0", "--paths", "2000",
                       "--out", str(tmp_path / "b"))
    assert code == 0 and json.loads(out)["ratio_min"] > 0
    assert (tmp_path / "b" / "bound_ratio.svg").exists()


def test_experiment_exit_codes(capsys, tmp_path):
    code, out, _ = run(capsys, "experiment", "lemma31_constants", "--out", str(tmp_path))
    assert code == 0 and "PASS" in out
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"name": "ex62_tilted", "seed": 0, "overrides": {"n_paths": 200}}))
    code, out, _ = run(capsys, "experiment", "ex62_tilted", "--config", str(cfg), "--out", str(tmp_path))
    assert code == 1 and "FAIL" in out
    cfg.write_text(json.dumps({"name": "ex62_tilted", "seed": 0, "bogus": 1}))
    code, _, err = run(capsys, "experiment", "ex62_tilted", "--config", str(cfg))
    assert code == 2 and "bogus" in err
