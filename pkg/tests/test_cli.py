import json

import pytest

from ancilla_sff import cli
from ancilla_sff.errors import NumericalError
from ancilla_sff.results import read_series

BASE = ["--D0", "4", "--gamma", "0.5", "--samples", "40", "--t-max", "16"]


def run(*args):
    return cli.main(list(args))


def test_sff_outputs(tmp_path):
    assert run("sff", *BASE, "--out", str(tmp_path)) == 0
    s = read_series(tmp_path / "series.csv")
    assert s["t"].tolist() == list(range(17)) and s["mean_re"][0] == 1.0
    meta = json.loads((tmp_path / "meta.json").read_text())
    assert meta["config"]["experiment"] == "sff" and meta["config"]["n_samples"] == 40


def test_two_point_outputs(tmp_path):
    assert run("two-point", *BASE, "--observable", "anc:Z, env_q0:Z", "--out", str(tmp_path)) == 0
    for name in ("series.csv", "sff.csv", "delta.csv", "meta.json"):
        assert (tmp_path / name).exists()
    assert read_series(tmp_path / "series.csv")["mean_re"][0] == pytest.approx(1.0)


def test_theory_output(tmp_path):
    assert run("theory", *BASE, "--observable", "anc:Z, env_q0:Z", "--out", str(tmp_path)) == 0
    head = (tmp_path / "theory.csv").read_text().splitlines()[0]
    assert head == "t,ramp_eq4,full_plateau,delta,two_point"


def test_freeness_check_output(tmp_path):
    assert run("freeness-check", *BASE, "--ensemble", "cue", "--observable", "anc:Z, env_q0:Z",
               "--out", str(tmp_path)) == 0
    rep = json.loads((tmp_path / "freeness.json").read_text())
    assert {"t", "z", "chi2_dof", "pass"} <= set(rep)
    assert rep["ensemble"] == "cue"


def test_compare_passes_on_matching_model(tmp_path):
    code = run("compare", "--D0", "8", "--gamma", "1.0", "--samples", "600", "--t-max", "48",
               "--seed", "3", "--out", str(tmp_path))
    assert code == 0
    last = (tmp_path / "residuals.csv").read_text().splitlines()[-1]
    assert last.startswith("chi2_dof=") and last.endswith("pass=true")


def test_compare_fails_with_exit_3(tmp_path):
    # decoupled circuit measured against the coupled-model prediction
    code = run("compare", "--D0", "8", "--gamma", "1.0", "--samples", "600", "--t-max", "48",
               "--ensemble", "decoupled", "--out", str(tmp_path))
    assert code == 3
    assert (tmp_path / "residuals.csv").read_text().rstrip().endswith("pass=false")


def test_config_file_and_flag_override(tmp_path):
    cfg = tmp_path / "run.yaml"
    cfg.write_text("D0: 4\ngamma: 0.5\nexperiment: sff\nn_samples: 10\nt_max: 8\nseed: 1\n")
    out = tmp_path / "o"
    assert run("sff", "--config", str(cfg), "--seed", "7", "--out", str(out)) == 0
    meta = json.loads((out / "meta.json").read_text())
    assert meta["master_seed"] == 7 and meta["config"]["t_max"] == 8


def test_validation_failure_exit_1(tmp_path, capsys):
    assert run("sff", "--D0", "4", "--gamma", "-1", "--out", str(tmp_path)) == 1
    assert "gamma must be > 0" in capsys.readouterr().err
    assert run("two-point", *BASE, "--out", str(tmp_path)) == 1
    assert run("sff", "--config", str(tmp_path / "missing.yaml")) == 1


def test_numerical_failure_exit_2(tmp_path, monkeypatch, capsys):
    def boom(*a, **k):
        raise NumericalError("Schur decomposition failed")

    monkeypatch.setattr(cli, "run_ensemble", boom)
    assert run("sff", *BASE, "--out", str(tmp_path)) == 2
    assert "numerical failure" in capsys.readouterr().err


def test_plot_subcommand(tmp_path, capsys):
    assert run("sff", *BASE, "--out", str(tmp_path)) == 0
    assert run("plot", str(tmp_path / "series.csv"), "--style", "linear") == 0
    assert (tmp_path / "series.svg").exists()
    assert run("plot", str(tmp_path / "nope.csv")) == 1


def test_reruns_byte_identical(tmp_path):
    for sub in ("a", "b"):
        assert run("sff", *BASE, "--workers", "2", "--out", str(tmp_path / sub)) == 0
    assert (tmp_path / "a" / "series.csv").read_bytes() == (tmp_path / "b" / "series.csv").read_bytes()


def test_module_entry_point():
    import subprocess
    import sys

    r = subprocess.run([sys.executable, "-m", "ancilla_sff", "--help"], capture_output=True, text=True)
    assert r.returncode == 0
    for sub in ("sff", "two-point", "theory", "freeness-check", "compare", "plot"):
        assert sub in r.stdout
