import json

import numpy as np
import pytest

from ancilla_sff import __version__, cli
from ancilla_sff.config import parse_config
from ancilla_sff.errors import DimensionError, ParameterError
from ancilla_sff.estimators import TimeSeriesEstimate, residuals, run_ensemble
from ancilla_sff.results import fmt_float, read_series, write_residuals, write_results, write_series
from ancilla_sff.svgplot import emit_plot
from ancilla_sff.theory import theory_curve


@pytest.fixture(scope="module")
def k_run():
    cfg = parse_config("D0: 4\ngamma: 0.5\nexperiment: sff\nn_samples: 40\nt_max: 3\nseed: 8\n")
    return cfg, run_ensemble(cfg.model)


def test_fmt_float_round_trips():
    for x in (0.1, 1 / 3, 1e-300, -2.5e17, 0.0):
        assert float(fmt_float(x)) == x
    assert fmt_float(-0.0) == "0.0"


def test_k_run_csv(tmp_path, k_run):
    cfg, res = k_run
    curve = theory_curve("full_plateau", res.sff.t_grid, cfg.model)
    write_results(res.sff, curve, cfg, tmp_path)
    lines = (tmp_path / "series.csv").read_bytes().split(b"\n")
    assert lines[0] == b"t,mean_re,mean_im,stderr,n,theory"
    assert lines[1].startswith(b"0,1.0,0.0,0.0,40,1.0")
    assert len([ln for ln in lines if ln]) == 5
    assert b"\r" not in (tmp_path / "series.csv").read_bytes()
    meta = json.loads((tmp_path / "meta.json").read_text())
    assert meta["master_seed"] == 8 and meta["code_version"] == __version__
    assert meta["config"]["D0"] == 4 and "wall_time_seconds" in meta


def test_rerun_byte_identical(tmp_path, k_run):
    cfg, _ = k_run
    for sub in ("a", "b"):
        res = run_ensemble(cfg.model)
        write_results(res.sff, None, cfg, tmp_path / sub, wall_time=0.0)
    assert (tmp_path / "a" / "series.csv").read_bytes() == (tmp_path / "b" / "series.csv").read_bytes()
    assert (tmp_path / "a" / "meta.json").read_bytes() == (tmp_path / "b" / "meta.json").read_bytes()


def test_read_series_round_trip(tmp_path, k_run):
    _, res = k_run
    write_series(tmp_path / "s.csv", res.sff)
    back = read_series(tmp_path / "s.csv")
    np.testing.assert_array_equal(back["t"], res.sff.t_grid)
    np.testing.assert_array_equal(back["mean_re"], res.sff.mean.real)
    np.testing.assert_array_equal(back["stderr"], res.sff.stderr())


def test_read_series_errors(tmp_path):
    (tmp_path / "empty.csv").write_text("t,mean_re,mean_im,stderr,n\n")
    with pytest.raises(DimensionError, match="no data"):
        read_series(tmp_path / "empty.csv")
    (tmp_path / "cols.csv").write_text("t,mean_re\n0,1.0\n")
    with pytest.raises(DimensionError, match="missing columns"):
        read_series(tmp_path / "cols.csv")


def test_theory_shape_checked(tmp_path, k_run):
    _, res = k_run
    with pytest.raises(DimensionError):
        write_series(tmp_path / "x.csv", res.sff, np.zeros(2))


def test_unwritable_directory_reports_path(tmp_path, k_run):
    cfg, res = k_run
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(OSError, match="file"):
        write_results(res.sff, None, cfg, blocker / "sub")


def test_residuals_file(tmp_path, k_run):
    _, res = k_run
    rep = residuals(res.sff, res.sff.mean.real, t_min=1)
    write_residuals(tmp_path / "residuals.csv", {"sff": rep})
    lines = (tmp_path / "residuals.csv").read_text().splitlines()
    assert lines[0] == "series,t,z,flagged"
    assert lines[1] == "sff,1,0.0,0"
    assert lines[-1] == "chi2_dof=0.0 pass=true"


# --- SVG ------------------------------------------------------------------------


def _run_dir(tmp_path, experiment, obs=None):
    args = [experiment.replace("_", "-"), "--D0", "4", "--gamma", "0.5", "--samples", "30",
            "--t-max", "24", "--out", str(tmp_path)]
    for o in obs or []:
        args += ["--observable", o]
    assert cli.main(args) == 0
    return tmp_path


def test_sff_plot_has_guides(tmp_path):
    d = _run_dir(tmp_path, "sff")
    out = emit_plot(d / "series.csv")
    svg = out.read_text()
    assert out.suffix == ".svg" and svg.startswith("<svg")
    assert "ramp t/D^2" in svg and "plateau 1/D" in svg and "theory" in svg
    assert svg.count("<circle") == 24  # t = 0 is dropped on log axes


def test_two_point_plot_overlays(tmp_path):
    d = _run_dir(tmp_path, "two_point", ["anc:Z, env_q0:Z"])
    svg = emit_plot(d / "series.csv").read_text()
    assert "free: K(t)&lt;AB&gt;" in svg and "K(t)&lt;AB&gt; + Delta(t)" in svg
    assert 'stroke-dasharray="6 4"' in svg
    assert svg.count("<circle") == 25
    delta_svg = emit_plot(d / "delta.csv", d / "delta.svg").read_text()
    assert "Departure from freeness" in delta_svg


def test_plot_is_deterministic(tmp_path):
    d = _run_dir(tmp_path, "sff")
    a = emit_plot(d / "series.csv", d / "a.svg").read_bytes()
    b = emit_plot(d / "series.csv", d / "b.svg").read_bytes()
    assert a == b


def test_empty_series_writes_nothing(tmp_path):
    (tmp_path / "series.csv").write_text("t,mean_re,mean_im,stderr,n\n")
    with pytest.raises(DimensionError):
        emit_plot(tmp_path / "series.csv")
    assert not (tmp_path / "series.svg").exists()


def test_plot_without_meta_uses_theory_column(tmp_path, k_run):
    cfg, res = k_run
    write_series(tmp_path / "k.csv", res.sff, theory_curve("full_plateau", res.sff.t_grid, cfg.model))
    svg = emit_plot(tmp_path / "k.csv", style="linear").read_text()
    assert "theory" in svg and "ramp" not in svg


def test_plot_style_validated(tmp_path, k_run):
    _, res = k_run
    write_series(tmp_path / "k.csv", res.sff)
    with pytest.raises(ParameterError):
        emit_plot(tmp_path / "k.csv", style="polar")


def test_single_sample_series_writes_zero_stderr(tmp_path):
    est = TimeSeriesEstimate.from_samples(np.arange(3), np.ones((1, 3)))
    write_series(tmp_path / "one.csv", est)
    assert read_series(tmp_path / "one.csv")["stderr"].tolist() == [0.0, 0.0, 0.0]
