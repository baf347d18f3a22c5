import json
import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from cylstable.errors import ConfigError, ExperimentError
from cylstable.experiments import (
    EXPERIMENTS,
    ExperimentConfig,
    experiment_names,
    loglog_slope,
    run_experiment,
)
from cylstable.svg import Plot


def test_catalog_names():
    assert set(experiment_names()) == {
        "lemma31_constants", "exit_scaling", "survival_bound", "thm11_disc", "thm11_lambda1",
        "thm16_four_squares", "ex61_lshape", "ex62_tilted", "ex63_diagonal", "irreducibility_suite"}
    for spec in EXPERIMENTS.values():
        assert len(set(spec.criteria)) == len(spec.criteria)


@pytest.mark.parametrize("bad", [
    {"name": "exit_scaling"},                                   # no seed
    {"name": "nope", "seed": 1},
    {"name": "exit_scaling", "seed": 1, "colour": "red"},
    {"name": "exit_scaling", "seed": 1, "overrides": {"n_pathz": 10}},
    {"name": "exit_scaling", "seed": 1, "overrides": {"n_paths": -3}},
    {"name": "exit_scaling", "seed": 1, "overrides": {"n_trials": 10}},   # not used by this experiment
    {"name": "exit_scaling", "seed": -1},
    {"name": "exit_scaling", "seed": 1, "alpha": 2.5},
])
def test_config_rejects(bad):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(bad)


def test_config_json_round_trip(tmp_path):
    cfg = ExperimentConfig("exit_scaling", 5, overrides={"n_paths": 100}, output_dir=str(tmp_path))
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg.to_dict()))
    assert ExperimentConfig.from_json(path) == cfg
    path.write_text("{not json")
    with pytest.raises(ConfigError):
        ExperimentConfig.from_json(path)


def test_lemma31_report(tmp_path):
    rep = run_experiment(ExperimentConfig("lemma31_constants", 0, output_dir=str(tmp_path)))
    assert rep.passed
    assert sorted(v.criterion for v in rep.verdicts) == sorted(EXPERIMENTS["lemma31_constants"].criteria)
    data = json.loads((tmp_path / "lemma31_constants" / "report.json").read_text())
    assert data["passed"] and data["provenance"]["seed"] == 0
    assert data["provenance"]["code_version"]
    for a in rep.artifacts:
        if a.endswith(".svg"):
            ET.parse(a)


def test_csv_is_reproducible_across_workers(tmp_path):
    outs = []
    for w in (1, 2):
        d = tmp_path / f"w{w}"
        run_experiment(ExperimentConfig("survival_bound", 3, output_dir=str(d),
                                        overrides={"n_paths": 3000, "n_paths_small": 2000, "workers": w}))
        outs.append(d / "survival_bound")
    for name in ("boundary_decay.csv", "small_time_exit.csv"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


def test_module_errors_carry_experiment_context(tmp_path):
    cfg = ExperimentConfig("thm11_lambda1", 0, output_dir=str(tmp_path), overrides={"n_paths": 20, "n_boot": 2})
    with pytest.raises(ExperimentError) as info:
        run_experiment(cfg)
    assert info.value.experiment == "thm11_lambda1"
    assert "B(0,1)" in info.value.stage


def test_irreducibility_small(tmp_path):
    rep = run_experiment(ExperimentConfig("irreducibility_suite", 2, output_dir=str(tmp_path),
                                          overrides={"n_grids": 3, "n_trials": 50}))
    assert rep.passed
    found = next(v for v in rep.verdicts if v.criterion == "AC10.hgamma_falsified").measured
    assert set(found) == {"four_squares", "diagonal_balls_6_3", "nested_channel_6_1", "tilted_rect_6_2"}
    assert all(ce is not None and "x" in ce for ce in found.values())


def test_loglog_slope():
    t = np.array([0.25, 0.5, 1.0])
    s, se = loglog_slope(t, 3.0 * t**2.5)
    assert s == pytest.approx(2.5) and se == pytest.approx(0.0, abs=1e-10)
    s, se = loglog_slope(t, 3.0 * t**2.5, 0.1 * 3.0 * t**2.5)
    assert s == pytest.approx(2.5) and se > 0
    assert math.isnan(loglog_slope(t, [0.0, 1.0, 2.0])[0])


def test_svg_writer_handles_log_axes_and_zeros():
    plot = Plot("t", "x", "y", logx=True, logy=True)
    plot.add("a", [0.1, 1, 10], [1e-3, 0.0, 1.0], [1e-4, 0.0, 0.5])
    plot.add("b", [0.1, 10], [1.0, 1.0], dashed=True)
    plot.hlines.append((0.5, "half <ref>"))
    root = ET.fromstring(plot.render())
    assert root.tag.endswith("svg")
    assert "&lt;ref&gt;" in plot.render()
