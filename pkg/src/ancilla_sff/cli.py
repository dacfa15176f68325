"""Command-line entry point.

Exit codes: 0 success, 1 validation failure, 2 numerical failure,
3 failed theory comparison (``compare`` only).
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import theory
from .config import RunConfig, load_config, parse_config
from .errors import ConfigError, DimensionError, NumericalError, ParameterError
from .estimators import residuals, run_ensemble
from .freeprob import freeness_check_k1
from .model import build_observable
from .results import (ensure_dir, fmt_float, write_json, write_meta, write_residuals, write_results,
                      write_series)
from .svgplot import STYLES, emit_plot

log = logging.getLogger("ancilla_sff")

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL, EXIT_COMPARE = 0, 1, 2, 3
SUBCOMMANDS = {
    "sff": "sff",
    "two-point": "two_point",
    "theory": "theory_only",
    "freeness-check": "freeness_check",
    "compare": "compare",
}


def _observables(cfg: RunConfig):
    if not cfg.observables:
        return None, None
    a = build_observable(cfg.observables[0], cfg.model)
    b = build_observable(cfg.observables[-1], cfg.model)
    return a, b


def _files_entry(name, label, formula):
    return {"file": name, "label": label, "theory": formula}


def run_sff(cfg: RunConfig) -> int:
    res = run_ensemble(cfg.model, workers=cfg.workers)
    curve = theory.theory_curve("full_plateau", res.sff.t_grid, cfg.model)
    write_results(res.sff, curve, cfg, cfg.output_dir, wall_time=res.wall_time,
                  extra={"series_files": [_files_entry("series.csv", "sff", "full_plateau")]})
    log.info("sff: %d samples in %.1fs", cfg.model.n_samples, res.wall_time)
    return EXIT_OK


def run_two_point(cfg: RunConfig) -> int:
    a, b = _observables(cfg)
    res = run_ensemble(cfg.model, a, b, workers=cfg.workers)
    out = ensure_dir(cfg.output_dir)
    t = res.sff.t_grid
    tp = theory.theory_curve("two_point", t, cfg.model, a, b)
    write_series(out / "sff.csv", res.sff, theory.theory_curve("full_plateau", t, cfg.model))
    write_series(out / "delta.csv", res.delta, theory.theory_curve("delta", t, cfg.model, a, b))
    files = [_files_entry("series.csv", "two_point", "two_point"),
             _files_entry("sff.csv", "sff", "full_plateau"),
             _files_entry("delta.csv", "delta", "delta")]
    write_results(res.two_point, tp, cfg, out, wall_time=res.wall_time,
                  extra={"series_files": files, "ab": float(np.real(res.ab))})
    return EXIT_OK


def run_theory(cfg: RunConfig) -> int:
    out = ensure_dir(cfg.output_dir)
    t = cfg.model.t_grid()
    cols = {"ramp_eq4": theory.theory_curve("ramp_eq4", t, cfg.model).values,
            "full_plateau": theory.theory_curve("full_plateau", t, cfg.model).values}
    a, b = _observables(cfg)
    if a is not None:
        cols["delta"] = theory.theory_curve("delta", t, cfg.model, a, b).values
        cols["two_point"] = theory.theory_curve("two_point", t, cfg.model, a, b).values
    with open(out / "theory.csv", "w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(["t"] + list(cols)) + "\n")
        for i, ti in enumerate(t):
            fh.write(",".join([str(int(ti))] + [fmt_float(v[i]) for v in cols.values()]) + "\n")
    write_meta(out / "meta.json", cfg, series={"file": "theory.csv", "label": "theory",
                                               "theory": list(cols)}, wall_time=0.0)
    return EXIT_OK


def run_freeness(cfg: RunConfig) -> int:
    a, b = _observables(cfg)
    m = cfg.model
    gamma = None if m.ensemble == "cue" else m.gamma
    rep = freeness_check_k1(m.D, a, b, m.n_samples, m.master_seed, gamma=gamma,
                            t_max=m.t_max, workers=cfg.workers)
    out = ensure_dir(cfg.output_dir)
    write_json(out / "freeness.json", rep.to_dict())
    log.info("freeness check: fraction within %.3f, chi2/dof %.3f, pass=%s",
             rep.fraction_within, rep.chi2_dof, rep.passed)
    return EXIT_OK


def run_compare(cfg: RunConfig) -> int:
    a, b = _observables(cfg)
    m = cfg.model
    res = run_ensemble(m, a, b, workers=cfg.workers)
    out = ensure_dir(cfg.output_dir)
    t = res.sff.t_grid
    k_curve = theory.theory_curve("full_plateau", t, m)
    reports = {"sff": residuals(res.sff, k_curve.values, t_min=2)}
    files = [_files_entry("series.csv", "sff", "full_plateau")]
    if a is not None:
        d_curve = theory.theory_curve("delta", t, m, a, b)
        reports["delta"] = residuals(res.delta, d_curve.values, t_min=2, t_max=min(m.t_max, m.D))
        write_series(out / "delta.csv", res.delta, d_curve)
        files.append(_files_entry("delta.csv", "delta", "delta"))
    write_results(res.sff, k_curve, cfg, out, wall_time=res.wall_time,
                  extra={"series_files": files,
                         "comparison": {k: r.summary() for k, r in reports.items()}})
    write_residuals(out / "residuals.csv", reports)
    ok = all(r.passed() for r in reports.values())
    for k, r in reports.items():
        log.info("compare %s: fraction within 4 stderr %.3f, chi2/dof %.3f",
                 k, r.fraction_within, r.chi2_dof)
    return EXIT_OK if ok else EXIT_COMPARE


RUNNERS = {
    "sff": run_sff,
    "two_point": run_two_point,
    "theory_only": run_theory,
    "freeness_check": run_freeness,
    "compare": run_compare,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ancilla-sff", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", type=Path, help="YAML/JSON config file")
        s.add_argument("--seed", type=int)
        s.add_argument("--samples", type=int, dest="n_samples")
        s.add_argument("--workers", type=int)
        s.add_argument("--out", dest="output_dir")
        s.add_argument("--D0", type=int)
        s.add_argument("--gamma", type=float)
        s.add_argument("--t-max", type=int, dest="t_max")
        s.add_argument("--ensemble", choices=("ancilla", "decoupled", "cue"))
        s.add_argument("--observable", action="append", dest="observables",
                       help="Pauli string such as 'anc:Z, env_q0:Z' (repeat for B)")
    pl = sub.add_parser("plot")
    pl.add_argument("series", type=Path, help="series CSV (meta.json alongside)")
    pl.add_argument("--style", choices=STYLES)
    pl.add_argument("--out", type=Path, dest="output")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "plot":
            path = emit_plot(args.series, args.output, style=args.style)
            print(path)
            return EXIT_OK
        overrides = {k: getattr(args, k) for k in
                     ("seed", "n_samples", "workers", "output_dir", "D0", "gamma", "t_max",
                      "ensemble", "observables")}
        overrides["experiment"] = SUBCOMMANDS[args.command]
        if args.config is not None:
            cfg = load_config(args.config, overrides=overrides)
        else:
            cfg = parse_config("", overrides=overrides)
        return RUNNERS[cfg.experiment](cfg)
    except (ConfigError, ParameterError, DimensionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
