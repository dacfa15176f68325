"""The ancilla-coupled Floquet model and its observables.

Hilbert space ordering is environment (x) ancilla throughout: composite index
``2*mu + a`` for environment state ``mu`` and ancilla state ``a``.  When the
environment is made of qubits, ``env_q0`` is the most significant factor.

Ancilla conventions: standard Pauli matrices, ``sigma^+ = (sigma_1 + i sigma_2)/2
= [[0, 1], [0, 0]]``.
"""

from __future__ import annotations

import math
import re
import warnings
from dataclasses import dataclass, field, fields, replace

import numpy as np

from . import ensembles
from .ensembles import SeedStream, derive_stream
from .errors import DimensionError, ParameterError
from .linalg import UnitaryMatrix, as_complex_matrix, eigenphases, svd

ENSEMBLES = ("ancilla", "decoupled", "cue")
FROZEN_COUPLING_STREAM = 2 ** 64 - 1

PAULI = {
    "1": np.eye(2, dtype=np.complex128),
    "X": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "Z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
}
ANCILLA_AXES = (PAULI["X"], PAULI["Y"], PAULI["Z"])


class GoldenRuleWarning(UserWarning):
    """gamma is below the environment level spacing; theory is out of warranty."""


@dataclass(frozen=True)
class ModelParams:
    """Physical and run parameters.  ``t_max`` defaults to ``4 * D``.

    ``ensemble`` selects what a realization is: ``"ancilla"`` (the coupled
    model), ``"decoupled"`` (``U_g = 1``) or ``"cue"`` (one Haar matrix of
    the full dimension ``D``).  ``freeze_coupling`` reuses a single ``W``
    across the ensemble; ``coupling_phase`` multiplies ``W`` by
    ``exp(i * coupling_phase)``.
    """

    D0: int
    gamma: float
    master_seed: int = 0
    n_samples: int = 10_000
    t_max: int | None = None
    ensemble: str = "ancilla"
    freeze_coupling: bool = False
    coupling_phase: float = 0.0

    def __post_init__(self):
        problems = validate_params(self)
        if problems:
            raise ParameterError("; ".join(f"{k}: {v}" for k, v in problems))
        if self.t_max is None:
            object.__setattr__(self, "t_max", 4 * self.D)
        if self.ensemble == "ancilla" and self.gamma < self.level_spacing:
            warnings.warn(
                f"gamma={self.gamma} is below the level spacing 2*pi/D0="
                f"{self.level_spacing:.4g}; golden-rule theory is out of warranty",
                GoldenRuleWarning,
                stacklevel=3,
            )

    @property
    def D(self) -> int:
        return 2 * self.D0

    @property
    def g(self) -> float:
        return math.sqrt(2.0 * self.gamma)

    @property
    def level_spacing(self) -> float:
        return 2.0 * math.pi / self.D0

    @property
    def heisenberg_time(self) -> int:
        return self.D

    def t_grid(self) -> np.ndarray:
        return np.arange(self.t_max + 1)

    def stream(self, i: int) -> SeedStream:
        return derive_stream(self.master_seed, i)

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _is_int(x) -> bool:
    return isinstance(x, (int, np.integer)) and not isinstance(x, bool)


def validate_params(p) -> list[tuple[str, str]]:
    """Every constraint violation of a parameter set, as ``(field, message)``."""
    out = []
    if not _is_int(p.D0) or p.D0 < 1:
        out.append(("D0", "D0 must be a positive integer"))
    if isinstance(p.gamma, bool) or not isinstance(p.gamma, (int, float)):
        out.append(("gamma", "gamma must be a number"))
    elif not (p.gamma > 0 and math.isfinite(p.gamma)):
        out.append(("gamma", "gamma must be > 0"))
    if not _is_int(p.master_seed) or not 0 <= p.master_seed < 2 ** 64:
        out.append(("seed", "seed must be an unsigned 64-bit integer"))
    if not _is_int(p.n_samples) or p.n_samples < 1:
        out.append(("n_samples", "n_samples must be >= 1"))
    if p.t_max is not None and (not _is_int(p.t_max) or p.t_max < 1):
        out.append(("t_max", "t_max must be an integer >= 1"))
    if p.ensemble not in ENSEMBLES:
        out.append(("ensemble", f"ensemble must be one of {ENSEMBLES}"))
    if not isinstance(p.freeze_coupling, bool):
        out.append(("freeze_coupling", "freeze_coupling must be a boolean"))
    if isinstance(p.coupling_phase, bool) or not isinstance(p.coupling_phase, (int, float)):
        out.append(("coupling_phase", "coupling_phase must be a number"))
    return out


# --- coupling and Floquet operator -------------------------------------------


def _to_env_major(blocks: np.ndarray) -> np.ndarray:
    """Reorder ``(a, mu, b, nu)`` ancilla-major blocks into env (x) ancilla."""
    d0 = blocks.shape[1]
    return blocks.transpose(1, 0, 3, 2).reshape(2 * d0, 2 * d0)


def coupling_unitary(w) -> UnitaryMatrix:
    """``exp(-i (W (x) sigma^+ + W^dagger (x) sigma^-))`` in closed form from ``svd(W)``."""
    w = as_complex_matrix(w)
    if w.shape[0] != w.shape[1]:
        raise DimensionError(f"coupling matrix must be square, got {w.shape}")
    left, sigma, right = svd(w)
    l, r = left.matrix, right.matrix
    c, s = np.cos(sigma), np.sin(sigma)
    d0 = w.shape[0]
    blocks = np.empty((2, d0, 2, d0), dtype=np.complex128)
    blocks[0, :, 0, :] = (l * c) @ l.conj().T
    blocks[0, :, 1, :] = -1j * (l * s) @ r.conj().T
    blocks[1, :, 0, :] = -1j * (r * s) @ l.conj().T
    blocks[1, :, 1, :] = (r * c) @ r.conj().T
    return UnitaryMatrix.certify(_to_env_major(blocks))


def coupling_hamiltonian(w) -> np.ndarray:
    """``W (x) sigma^+ + W^dagger (x) sigma^-`` as a dense matrix."""
    w = as_complex_matrix(w)
    sp = np.array([[0, 1], [0, 0]], dtype=np.complex128)
    return np.kron(w, sp) + np.kron(w.conj().T, sp.T)


def floquet_step(u0: UnitaryMatrix, ug: UnitaryMatrix) -> UnitaryMatrix:
    """One period ``U = U_g (U_0 (x) 1_2)``."""
    if ug.dim != 2 * u0.dim:
        raise DimensionError(f"dim(Ug)={ug.dim} must equal 2*dim(U0)={2 * u0.dim}")
    return UnitaryMatrix.certify(ug.matrix @ np.kron(u0.matrix, np.eye(2)))


def sample_floquet(params: ModelParams, stream: SeedStream, coupling=None) -> UnitaryMatrix:
    """Draw one realization of the Floquet operator.

    ``coupling`` overrides the sampled ``W`` (e.g. ``np.zeros`` for the
    decoupled limit).  ``U_0`` is always drawn first from the stream.
    """
    if params.ensemble == "cue":
        return ensembles.sample_haar(params.D, stream)
    rng = stream.generator()
    u0 = ensembles.sample_haar(params.D0, rng)
    if params.ensemble == "decoupled":
        return UnitaryMatrix.certify(np.kron(u0.matrix, np.eye(2)))
    if coupling is None:
        if params.freeze_coupling:
            src = derive_stream(params.master_seed, FROZEN_COUPLING_STREAM)
        else:
            src = rng
        coupling = ensembles.sample_coupling(params.D0, params.gamma, src)
    if params.coupling_phase:
        coupling = np.exp(1j * params.coupling_phase) * np.asarray(coupling)
    return floquet_step(u0, coupling_unitary(coupling))


def realization_spectrum(params: ModelParams, stream: SeedStream, coupling=None):
    """Eigenphases and diagonalizing frame of one realization."""
    return eigenphases(sample_floquet(params, stream, coupling))


# --- observables -------------------------------------------------------------

_SITE_RE = re.compile(r"^(anc|env|env_q(\d+))$")


def parse_pauli_string(text: str) -> tuple[tuple[str, str], ...]:
    """Parse ``"anc:Z, env_q0:Z"`` into canonical ``(site, op)`` pairs.

    Case-insensitive and whitespace-tolerant.  Output is sorted with the
    ancilla first and environment qubits by index, so equivalent inputs give
    equal results.
    """
    pairs = {}
    body = text.strip()
    if not body:
        raise ParameterError("empty Pauli string")
    for raw in body.split(","):
        item = raw.strip()
        if ":" not in item:
            raise ParameterError(f"Pauli factor {item!r} is not of the form site:op")
        site, op = (s.strip().lower() for s in item.split(":", 1))
        m = _SITE_RE.match(site)
        if not m:
            raise ParameterError(f"unknown site tag {site!r}")
        op = op.upper()
        if op not in PAULI:
            raise ParameterError(f"unknown Pauli operator {op!r} on site {site!r}")
        if site == "env" and op != "1":
            raise ParameterError("site 'env' only accepts the identity; use env_qk tags")
        if site in pairs:
            raise ParameterError(f"site {site!r} given twice")
        pairs[site] = op
    if "env" in pairs and any(s.startswith("env_q") for s in pairs):
        raise ParameterError("'env' and 'env_qk' tags cannot be mixed")

    def key(site):
        return (0, 0) if site == "anc" else (1, -1) if site == "env" else (1, int(site[5:]))

    return tuple((s, pairs[s]) for s in sorted(pairs, key=key))


def format_pauli_string(spec) -> str:
    return ", ".join(f"{site}:{op}" for site, op in spec)


@dataclass(frozen=True, eq=False)
class Observable:
    matrix: np.ndarray = field(repr=False)
    spec: tuple
    traceless_env: bool
    traceless_anc: bool

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def label(self) -> str:
        return format_pauli_string(self.spec)

    @classmethod
    def from_matrix(cls, matrix, d0: int, spec=()) -> "Observable":
        a = as_complex_matrix(matrix)
        if a.shape != (2 * d0, 2 * d0):
            raise DimensionError(f"observable must be {2 * d0}x{2 * d0}, got {a.shape}")
        tr_env, tr_anc = partial_traces(a, d0)
        a.setflags(write=False)
        return cls(
            a,
            tuple(spec),
            traceless_env=bool(np.linalg.norm(tr_env) <= 1e-12),
            traceless_anc=bool(np.linalg.norm(tr_anc) <= 1e-12),
        )


def partial_traces(x: np.ndarray, d0: int):
    """``(tr_env X, tr_anc X)``: a 2x2 and a ``D0 x D0`` matrix."""
    t = np.asarray(x).reshape(d0, 2, d0, 2)
    return np.einsum("iaib->ab", t), np.einsum("iaja->ij", t)


def build_observable(spec, params: ModelParams) -> Observable:
    """Dense observable from a Pauli string (text or parsed pairs)."""
    pairs = parse_pauli_string(spec) if isinstance(spec, str) else tuple(spec)
    d0 = params.D0
    ops = dict(pairs)
    qubits = sorted(int(s[5:]) for s in ops if s.startswith("env_q"))
    if qubits:
        n_qubits = d0.bit_length() - 1
        if 2 ** n_qubits != d0:
            raise DimensionError(f"env_qk tags need D0 to be a power of two, got D0={d0}")
        if qubits[-1] >= n_qubits:
            raise DimensionError(
                f"env_q{qubits[-1]} does not exist: D0={d0} has {n_qubits} qubits"
            )
        env = np.ones((1, 1), dtype=np.complex128)
        for q in range(n_qubits):
            env = np.kron(env, PAULI[ops.get(f"env_q{q}", "1")])
    else:
        env = np.eye(d0, dtype=np.complex128)
    anc = PAULI[ops.get("anc", "1")]
    return Observable.from_matrix(np.kron(env, anc), d0, pairs)


def ancilla_pauli(k: int, d0: int) -> np.ndarray:
    """``1_{D0} (x) sigma_k`` for ``k`` in 1..3."""
    return np.kron(np.eye(d0), ANCILLA_AXES[k - 1])
