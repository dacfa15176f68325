"""CSV/JSON persistence of estimates, theory curves and residuals.

Floats are written with ``repr`` (shortest round-trip form) and files use
LF line endings, so identical inputs give byte-identical files.
"""

from __future__ import annotations

import csv
import json
import os
from pathlib import Path

import numpy as np

from . import __version__
from .errors import DimensionError

SERIES_COLUMNS = ("t", "mean_re", "mean_im", "stderr", "n")


def fmt_float(x) -> str:
    x = float(x)
    return repr(x + 0.0)  # folds -0.0 into 0.0


def _open_for_write(path: Path):
    try:
        return open(path, "w", newline="", encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc


def write_series(path, est, theory=None) -> Path:
    """Write one estimate as ``t,mean_re,mean_im,stderr,n[,theory]``."""
    path = Path(path)
    values = None
    if theory is not None:
        values = np.asarray(getattr(theory, "values", theory), dtype=float)
        if values.shape != est.t_grid.shape:
            raise DimensionError("theory curve does not match the estimate grid")
    se = est.stderr() if est.n >= 2 else np.zeros(est.t_grid.shape)
    header = list(SERIES_COLUMNS) + (["theory"] if values is not None else [])
    with _open_for_write(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i, t in enumerate(est.t_grid):
            row = [int(t), fmt_float(est.mean[i].real), fmt_float(est.mean[i].imag), fmt_float(se[i]), est.n]
            if values is not None:
                row.append(fmt_float(values[i]))
            w.writerow(row)
    return path


def read_series(path) -> dict:
    """Load a series CSV into column arrays; raises if required columns are missing."""
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise DimensionError(f"{path} holds no data rows")
    missing = [c for c in SERIES_COLUMNS if c not in rows[0]]
    if missing:
        raise DimensionError(f"{path} is missing columns: {', '.join(missing)}")
    out = {c: np.array([float(r[c]) for r in rows]) for c in rows[0]}
    out["t"] = out["t"].astype(int)
    return out


def write_meta(path, cfg, *, series: dict, wall_time: float, extra: dict | None = None) -> Path:
    """``meta.json``: config echo, seed, code version, wall time."""
    meta = {
        "config": cfg.to_mapping(),
        "master_seed": cfg.model.master_seed,
        "code_version": __version__,
        "series": series,
        "wall_time_seconds": round(float(wall_time), 3),
    }
    if extra:
        meta.update(extra)
    path = Path(path)
    with _open_for_write(path) as fh:
        fh.write(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return path


def write_results(est, theory, meta, directory, *, wall_time: float = 0.0,
                  name: str = "series.csv", extra: dict | None = None) -> dict:
    """Write ``series.csv`` and ``meta.json`` for one run into ``directory``."""
    directory = Path(directory)
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {directory}: {exc.strerror}") from exc
    series_path = write_series(directory / name, est, theory)
    info = {"file": name, "label": est.label,
            "theory": getattr(theory, "formula_id", None) if theory is not None else None}
    meta_path = write_meta(directory / "meta.json", meta, series=info, wall_time=wall_time,
                           extra=extra)
    return {"series": series_path, "meta": meta_path}


def write_residuals(path, reports: dict) -> Path:
    """``residuals.csv``: one row per (series, t) then ``chi2_dof=<v> pass=<bool>``.

    The summary pools z-scores over every series; ``pass`` requires each
    series to pass on its own.
    """
    path = Path(path)
    zs, ok = [], True
    with _open_for_write(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["series", "t", "z", "flagged"])
        for label, rep in reports.items():
            for t, z, f in zip(rep.t, rep.z, rep.flagged):
                w.writerow([label, int(t), fmt_float(z), int(bool(f))])
            zs.extend(rep.z[rep.valid])
            ok = ok and rep.passed()
        chi2 = float(np.mean(np.square(zs))) if zs else float("nan")
        fh.write(f"chi2_dof={fmt_float(chi2)} pass={str(ok).lower()}\n")
    return path


def write_json(path, payload: dict) -> Path:
    path = Path(path)
    with _open_for_write(path) as fh:
        fh.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


def ensure_dir(directory) -> Path:
    directory = Path(directory)
    os.makedirs(directory, exist_ok=True)
    return directory
