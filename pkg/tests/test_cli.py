"""Config handling, artifact writers, and command-line entry points."""
import json

import numpy as np
import pytest

from slcarma import NumericalError, ValidationError, Verdict
from slcarma import cli
from slcarma.cli import (ExperimentConfig, cmd_diagnose, cmd_moments,
                         cmd_reproduce_example, cmd_simulate,
                         example_config_dict, main)
from slcarma.io import read_series_csv

# white-noise runs can trip a benign divisor-snapping notice during detection
pytestmark = pytest.mark.filterwarnings("ignore:line spacing")


def _config_file(tmp_path, doc, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


def _series_file(tmp_path, values, name="series.csv"):
    path = tmp_path / name
    path.write_text("Y\n" + "\n".join(repr(float(v)) for v in values) + "\n")
    return path


# ---------------------------------------------------------------------------
# configuration

def test_example_config_round_trip():
    config = ExperimentConfig.from_dict(example_config_dict())
    assert config.n_samples == 480
    np.testing.assert_allclose(config.sample_times()[:3], [1.0, 2.0, 3.0])
    assert config.sample_times()[-1] == 480.0
    again = ExperimentConfig.from_dict(config.to_dict())
    assert again.seed == config.seed
    assert again.n_samples == config.n_samples
    np.testing.assert_allclose(again.carma.a, config.carma.a)
    np.testing.assert_allclose(again.subordinator.partition.masses,
                               config.subordinator.partition.masses)
    control = ExperimentConfig.from_dict(example_config_dict(True))
    assert control.subordinator.partition.r == 1
    assert control.subordinator.partition.total_mass == 46.0


def test_config_validation():
    for mutate in (
        lambda d: d["sampling"].update(delta=7.0),      # 480/7 not integral
        lambda d: d["sampling"].update(method="rk4"),
        lambda d: d["sampling"].update(euler_h=-0.1),
        lambda d: d.update(burn_in_periods=-1),
        lambda d: d.update(seed=1.5),
        lambda d: d.pop("carma"),
    ):
        doc = example_config_dict()
        mutate(doc)
        with pytest.raises(ValidationError):
            ExperimentConfig.from_dict(doc)


def test_config_from_file_errors(tmp_path):
    with pytest.raises(ValidationError):
        ExperimentConfig.from_file(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ValidationError):
        ExperimentConfig.from_file(bad)


# ---------------------------------------------------------------------------
# commands

def test_simulate_is_byte_identical(tmp_path):
    doc = example_config_dict()
    doc["subordinator"]["horizon_periods"] = 4
    doc["seed"] = 3
    config = ExperimentConfig.from_dict(doc)
    first = cmd_simulate(config, tmp_path / "a")
    second = cmd_simulate(config, tmp_path / "b")
    assert [f.name for f in first] == ["subordinator.csv", "trajectory.csv"]
    for fa, fb in zip(first, second):
        assert fa.read_bytes() == fb.read_bytes()
    header = first[1].read_text().splitlines()[0]
    assert header == "time,Y,X_1,X_2,X_3"


def test_simulate_many_paths(tmp_path):
    doc = example_config_dict()
    doc["subordinator"]["horizon_periods"] = 2
    config = ExperimentConfig.from_dict(doc)
    files = cmd_simulate(config, tmp_path, n_paths=2)
    names = sorted(f.name for f in files)
    assert names == ["subordinator_0000.csv", "subordinator_0001.csv",
                     "trajectory_0000.csv", "trajectory_0001.csv"]
    with pytest.raises(ValidationError):
        cmd_simulate(config, tmp_path, n_paths=0)


def test_moments_files(tmp_path):
    config = ExperimentConfig.from_dict(example_config_dict())
    files = cmd_moments(config, tmp_path)
    mean_lines = files[0].read_text().splitlines()
    assert mean_lines[0] == "phase,mean_Y,var_Y"
    assert len(mean_lines) == 1 + 12
    assert mean_lines[1].startswith("0.0,")
    autocov_lines = files[1].read_text().splitlines()
    assert autocov_lines[0] == "phase,lag,autocov_Y"
    assert len(autocov_lines) == 1 + 12 * 4


def test_diagnose_series_file(tmp_path):
    rng = np.random.default_rng(1)
    series_path = _series_file(tmp_path, rng.standard_normal(480))
    out = tmp_path / "out"
    code = main(["diagnose", "--series", str(series_path), "--out", str(out)])
    assert code == 0
    verdict = json.loads((out / "verdict.json").read_text())
    assert verdict["class"] == "Stationary"
    assert verdict["period"] is None
    acf_lines = (out / "acf.csv").read_text().splitlines()
    assert acf_lines[0] == "lag,acf"
    assert len(acf_lines) == 1 + 121  # lags 0..120
    assert (out / "coherence.csv").read_text().startswith("p,q,value,significant")


def test_diagnose_no_detrend_flag(tmp_path):
    rng = np.random.default_rng(1)
    series_path = _series_file(tmp_path, 5.0 + rng.standard_normal(480))
    code = main(["diagnose", "--series", str(series_path), "--no-detrend",
                 "--out", str(tmp_path / "raw")])
    assert code == 0


def test_reproduce_example_end_to_end(tmp_path):
    verdict, ok = cmd_reproduce_example(tmp_path, seed=1)
    assert ok
    assert verdict.kind == "PC"
    assert verdict.period == 12
    assert verdict.line_offsets[0] == 40
    for name in ("subordinator.csv", "trajectory.csv", "mean.csv",
                 "autocov.csv", "coherence.csv", "acf.csv", "verdict.json"):
        assert (tmp_path / name).exists()
    assert len((tmp_path / "trajectory.csv").read_text().splitlines()) == 481
    saved = json.loads((tmp_path / "verdict.json").read_text())
    assert saved["class"] == "PC" and saved["period"] == 12


def test_reproduce_example_stationary_control(tmp_path):
    verdict, ok = cmd_reproduce_example(tmp_path, seed=1,
                                        stationary_control=True)
    assert ok
    assert verdict.kind == "Stationary"


# ---------------------------------------------------------------------------
# exit codes

def test_main_success_and_validation_codes(tmp_path):
    doc = example_config_dict()
    doc["subordinator"]["horizon_periods"] = 2
    config_path = _config_file(tmp_path, doc)
    assert main(["simulate", "--config", str(config_path),
                 "--out", str(tmp_path / "sim")]) == 0
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["simulate", "--config", str(bad)]) == 2
    assert main(["diagnose", "--out", str(tmp_path)]) == 2


def test_main_numerical_code(tmp_path, monkeypatch):
    doc = example_config_dict()
    config_path = _config_file(tmp_path, doc)

    def blow_up(config, out_dir):
        raise NumericalError("synthetic overflow")

    monkeypatch.setattr(cli, "cmd_moments", blow_up)
    assert main(["moments", "--config", str(config_path),
                 "--out", str(tmp_path)]) == 3


def test_main_verdict_code(monkeypatch, tmp_path):
    fake = Verdict("Stationary", None, (), 0.01, 0.0)
    monkeypatch.setattr(cli, "cmd_reproduce_example",
                        lambda out, seed=None, stationary_control=False: (fake, False))
    assert main(["reproduce-example", "--out", str(tmp_path)]) == 4


# ---------------------------------------------------------------------------
# series reader

def test_read_series_csv_variants(tmp_path):
    yfile = tmp_path / "traj.csv"
    yfile.write_text("time,Y,X_1\n1.0,2.5,0.0\n2.0,3.5,0.0\n")
    np.testing.assert_allclose(read_series_csv(yfile), [2.5, 3.5])

    named = tmp_path / "named.csv"
    named.write_text("value\n1.0\n2.0\n")
    np.testing.assert_allclose(read_series_csv(named), [1.0, 2.0])

    bare = tmp_path / "bare.csv"
    bare.write_text("1.5\n2.5\n3.5\n")
    np.testing.assert_allclose(read_series_csv(bare), [1.5, 2.5, 3.5])

    wide = tmp_path / "wide.csv"
    wide.write_text("1.0,9.0\n2.0,9.0\n")
    np.testing.assert_allclose(read_series_csv(wide), [1.0, 2.0])

    noy = tmp_path / "noy.csv"
    noy.write_text("time,X_1\n1.0,2.0\n")
    with pytest.raises(ValidationError):
        read_series_csv(noy)


def test_diagnose_missing_series_file_is_validation_exit(tmp_path, capsys):
    code = main(["diagnose", "--series", str(tmp_path / "nosuch.csv")])
    assert code == 2
    assert "cannot read series" in capsys.readouterr().err
