"""Non-crossing partitions, free cumulants, and the k=1 freeness check.

The moment-cumulant relation used here is the free one,

    m_n = sum_{pi in NC(n)} prod_{V in pi} kappa_{|V|},

for a single variable.  ``freeness_check_k1`` tests the lowest identity of
the hierarchy, ``E<A B_t> = K(t) <AB>`` for traceless ``A, B``.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations

import numpy as np

from .errors import ParameterError
from .estimators import residuals, run_ensemble
from .model import ModelParams, Observable

MAX_N = 12


@dataclass(frozen=True)
class NCPartition:
    n: int
    blocks: tuple

    def block_sizes(self) -> tuple:
        return tuple(len(b) for b in self.blocks)


def _check_n(n: int) -> None:
    if not isinstance(n, int) or not 1 <= n <= MAX_N:
        raise ParameterError(f"n must be an integer in 1..{MAX_N}, got {n!r}")


def _validate_partition(blocks, n=None):
    blocks = [tuple(sorted(int(x) for x in b)) for b in blocks]
    elems = [x for b in blocks for x in b]
    if n is None:
        n = max(elems, default=0)
    if any(len(b) == 0 for b in blocks) or sorted(elems) != list(range(1, n + 1)):
        raise ParameterError(f"{blocks} is not a partition of {{1..{n}}}")
    return blocks, n


def is_noncrossing(blocks, n: int | None = None) -> bool:
    """True iff no ``a < b < c < d`` has ``a, c`` in one block and ``b, d`` in another."""
    blocks, n = _validate_partition(blocks, n)
    owner = {x: i for i, b in enumerate(blocks) for x in b}
    for a, b, c, d in combinations(range(1, n + 1), 4):
        if owner[a] == owner[c] and owner[b] == owner[d] and owner[a] != owner[b]:
            return False
    return True


@lru_cache(maxsize=None)
def _nc_canonical(lo: int, hi: int):
    """All NC partitions of ``{lo..hi}`` as tuples of blocks.

    The block containing ``lo`` splits the rest into independent gaps,
    which is what makes the recursion non-crossing by construction.
    """
    if lo > hi:
        return ((),)
    out = []
    rest = list(range(lo + 1, hi + 1))
    for r in range(len(rest) + 1):
        for others in combinations(rest, r):
            first = (lo,) + others
            edges = list(first) + [hi + 1]
            gap_options = [_nc_canonical(edges[i] + 1, edges[i + 1] - 1) for i in range(len(first))]
            combos = [()]
            for opts in gap_options:
                combos = [c + o for c in combos for o in opts]
            out.extend((first,) + c for c in combos)
    return tuple(out)


def enumerate_nc(n: int) -> list[NCPartition]:
    """Every non-crossing partition of ``{1..n}``, ``Catalan(n)`` of them.

    Blocks are sorted by their leading element; the list is ordered
    lexicographically by that block sequence.
    """
    _check_n(n)
    parts = (tuple(sorted(p)) for p in _nc_canonical(1, n))
    return [NCPartition(n, p) for p in sorted(parts)]


def catalan(n: int) -> int:
    from math import comb

    return comb(2 * n, n) // (n + 1)


@dataclass(frozen=True)
class CumulantTable:
    order: int
    moments: tuple
    cumulants: tuple


@lru_cache(maxsize=None)
def _size_profiles(n: int):
    """NC(n) grouped by block-size multiset: ``{sorted sizes: count}``."""
    counts = {}
    for p in enumerate_nc(n):
        key = tuple(sorted(p.block_sizes()))
        counts[key] = counts.get(key, 0) + 1
    return counts


def _nc_sum(kappa, n: int) -> float:
    return sum(c * np.prod([kappa[s - 1] for s in sizes]) for sizes, c in _size_profiles(n).items())


def cumulants_to_moments(kappa) -> CumulantTable:
    kappa = [float(k) for k in kappa]
    n = len(kappa)
    _check_n(n)
    m = [float(_nc_sum(kappa, j)) for j in range(1, n + 1)]
    return CumulantTable(n, tuple(m), tuple(kappa))


def moments_to_cumulants(moments) -> CumulantTable:
    """Invert the free moment-cumulant relation order by order.

    ``m_n`` contains ``kappa_n`` exactly once (the one-block partition), so
    ``kappa_n = m_n - (NC sum with kappa_n set to zero)``.
    """
    m = [float(x) for x in moments]
    n = len(m)
    _check_n(n)
    kappa = []
    for j in range(1, n + 1):
        trial = kappa + [0.0]
        kappa.append(m[j - 1] - float(_nc_sum(trial, j)))
    return CumulantTable(n, tuple(m), tuple(kappa))


def classical_cumulants(moments) -> list[float]:
    """Classical cumulants from raw moments (standard recursion)."""
    from math import comb

    m = [1.0] + [float(x) for x in moments]
    k = [0.0] * len(m)
    for n in range(1, len(m)):
        k[n] = m[n] - sum(comb(n - 1, j - 1) * k[j] * m[n - j] for j in range(1, n))
    return k[1:]


# --- numerical freeness identity --------------------------------------------


@dataclass
class FreenessReport:
    t: np.ndarray
    z: np.ndarray
    chi2_dof: float
    fraction_within: float
    passed: bool
    measured_delta: np.ndarray
    stderr: np.ndarray
    ensemble: str
    gamma: float | None

    def to_dict(self) -> dict:
        return {
            "t": [int(x) for x in self.t],
            "z": [float(x) for x in self.z],
            "chi2_dof": float(self.chi2_dof),
            "fraction_within": float(self.fraction_within),
            "pass": bool(self.passed),
            "ensemble": self.ensemble,
            "gamma": self.gamma,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def freeness_check_k1(D: int, A: Observable, B: Observable, n_samples: int, seed: int, *,
                      gamma: float | None = None, t_max: int | None = None, t_min: int = 2,
                      workers: int = 1, threshold: float = 4.0,
                      min_fraction: float = 0.95) -> FreenessReport:
    """Compare both sides of ``E<A B_t> = K(t)<AB>`` on the same realizations.

    With ``gamma=None`` each realization is one Haar unitary of dimension
    ``D`` (the free limit).  With a ``gamma`` the ancilla model with
    ``D0 = D / 2`` is used instead, where the identity is expected to fail.
    z-scores are formed from the paired per-realization difference
    ``<A B_t>_i - <AB> K_i(t)``; ``t in {0, 1}`` is skipped by default.
    """
    if D % 2:
        raise ParameterError(f"D must be even, got {D}")
    for name, obs in (("A", A), ("B", B)):
        if abs(np.trace(np.asarray(obs.matrix))) > 1e-10 * D:
            warnings.warn(f"{name} is not traceless; the freeness identity does not apply",
                          stacklevel=2)
    params = ModelParams(
        D0=D // 2,
        gamma=1.0 if gamma is None else gamma,
        master_seed=seed,
        n_samples=n_samples,
        t_max=t_max if t_max is not None else 3 * D,
        ensemble="cue" if gamma is None else "ancilla",
    )
    res = run_ensemble(params, A, B, workers=workers)
    rep = residuals(res.delta, np.zeros(res.delta.t_grid.shape), t_min=t_min, threshold=threshold)
    sel = res.delta.window(t_min, params.t_max)
    return FreenessReport(
        t=rep.t, z=rep.z, chi2_dof=rep.chi2_dof, fraction_within=rep.fraction_within,
        passed=rep.passed(min_fraction),
        measured_delta=res.delta.mean.real[sel], stderr=res.delta.stderr()[sel],
        ensemble=params.ensemble, gamma=gamma,
    )
