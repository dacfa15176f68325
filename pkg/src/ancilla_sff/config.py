"""Run configuration: parsing, validation, serialization.

Config files are YAML mappings (JSON is accepted as a subset).  Validation
collects every problem before failing and reports the source line of the
offending key where one is known.
"""

from __future__ import annotations

from dataclasses import dataclass
from types import SimpleNamespace

import yaml

from .errors import ConfigError, ParameterError
from .model import ENSEMBLES, ModelParams, parse_pauli_string, validate_params

EXPERIMENTS = ("sff", "two_point", "theory_only", "freeness_check", "compare")
KEYS = (
    "D0", "gamma", "seed", "n_samples", "t_max", "experiment", "observables",
    "workers", "output_dir", "ensemble", "freeze_coupling", "coupling_phase",
)
DEFAULT_SAMPLES = 10_000


@dataclass(frozen=True)
class RunConfig:
    model: ModelParams
    experiment: str
    observables: tuple = ()
    output_dir: str = "results"
    workers: int = 1

    def to_mapping(self) -> dict:
        m = self.model
        return {
            "D0": m.D0,
            "gamma": m.gamma,
            "seed": m.master_seed,
            "n_samples": m.n_samples,
            "t_max": m.t_max,
            "experiment": self.experiment,
            "observables": list(self.observables),
            "workers": self.workers,
            "output_dir": self.output_dir,
            "ensemble": m.ensemble,
            "freeze_coupling": m.freeze_coupling,
            "coupling_phase": m.coupling_phase,
        }


def _key_lines(text: str) -> dict:
    try:
        node = yaml.compose(text)
    except yaml.YAMLError:
        return {}
    if not isinstance(node, yaml.MappingNode):
        return {}
    return {k.value: k.start_mark.line + 1 for k, _ in node.value if isinstance(k, yaml.ScalarNode)}


def parse_config(text: str, *, overrides: dict | None = None) -> RunConfig:
    """Parse and fully validate a config document.

    ``overrides`` (e.g. from command-line flags) replace document values
    before validation.  Defaults: ``n_samples = 10_000``, ``t_max = 4 * D``.
    """
    try:
        data = yaml.safe_load(text) if text.strip() else {}
    except yaml.YAMLError as exc:
        raise ConfigError([("document", f"not valid YAML/JSON: {exc}")]) from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError([("document", "top level must be a mapping")])
    lines = _key_lines(text)
    data = dict(data)
    for k, v in (overrides or {}).items():
        if v is not None:
            data[k] = v
    return config_from_mapping(data, lines)


def config_from_mapping(data: dict, lines: dict | None = None) -> RunConfig:
    lines = lines or {}
    problems = []

    def where(key):
        return f"line {lines[key]}, {key}" if key in lines else key

    for key in data:
        if key not in KEYS:
            problems.append((where(key), f"unknown key (allowed: {', '.join(KEYS)})"))
    for key in ("D0", "gamma", "experiment"):
        if key not in data:
            problems.append((key, "required key missing"))

    experiment = data.get("experiment")
    if "experiment" in data and experiment not in EXPERIMENTS:
        problems.append((where("experiment"), f"must be one of {', '.join(EXPERIMENTS)}"))

    observables = data.get("observables", [])
    if isinstance(observables, str):
        observables = [observables]
    if not isinstance(observables, list) or not all(isinstance(o, str) for o in observables):
        problems.append((where("observables"), "must be a list of Pauli-string texts"))
        observables = []
    parsed = []
    for o in observables:
        try:
            parsed.append(parse_pauli_string(o))
        except ParameterError as exc:
            problems.append((where("observables"), str(exc)))
    if len(observables) > 2:
        problems.append((where("observables"), "at most two observables (A, B)"))
    if experiment in ("two_point", "freeness_check") and not observables:
        problems.append((where("observables"), f"experiment {experiment} needs observables"))

    workers = data.get("workers", 1)
    if not isinstance(workers, int) or isinstance(workers, bool) or workers < 1:
        problems.append((where("workers"), "workers must be a positive integer"))
    output_dir = data.get("output_dir", "results")
    if not isinstance(output_dir, str) or not output_dir:
        problems.append((where("output_dir"), "output_dir must be a non-empty path"))

    gamma = data.get("gamma")
    if isinstance(gamma, int) and not isinstance(gamma, bool):
        gamma = float(gamma)
    phase = data.get("coupling_phase", 0.0)
    if isinstance(phase, int) and not isinstance(phase, bool):
        phase = float(phase)
    fields_ = dict(
        D0=data.get("D0"),
        gamma=gamma,
        master_seed=data.get("seed", 0),
        n_samples=data.get("n_samples", DEFAULT_SAMPLES),
        t_max=data.get("t_max"),
        ensemble=data.get("ensemble", "ancilla"),
        freeze_coupling=data.get("freeze_coupling", False),
        coupling_phase=phase,
    )

    probe = SimpleNamespace(**fields_)
    if "D0" in data and "gamma" in data:
        for key, msg in validate_params(probe):
            problems.append((where(key), msg))
    if problems:
        raise ConfigError(problems)

    model = ModelParams(**fields_)
    canon = tuple(", ".join(f"{s}:{op}" for s, op in p) for p in parsed)
    return RunConfig(model, experiment, canon, output_dir, workers)


def serialize_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(cfg.to_mapping(), sort_keys=False, default_flow_style=False)


def load_config(path, *, overrides: dict | None = None) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), overrides=overrides)


__all__ = [
    "ENSEMBLES", "EXPERIMENTS", "KEYS", "RunConfig", "config_from_mapping",
    "load_config", "parse_config", "serialize_config",
]
