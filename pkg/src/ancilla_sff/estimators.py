"""Monte Carlo estimation of K(t) and <A B_t> with mergeable statistics.

Realization ``i`` always uses stream id ``i``.  Realizations are grouped in
contiguous chunks of fixed size; chunk statistics are combined by a fixed
binary merge tree.  The pooled numbers therefore do not depend on how many
worker processes evaluated the chunks.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from threadpoolctl import threadpool_limits

from .errors import DimensionError, ParameterError
from .model import ModelParams, Observable, realization_spectrum

DEFAULT_CHUNK = 250


@dataclass
class TimeSeriesEstimate:
    """Per-time-step running mean and sums of squared deviations.

    ``m2`` accumulates the real part, ``m2_im`` the imaginary part, so that
    real and imaginary standard errors are both available.
    """

    t_grid: np.ndarray
    mean: np.ndarray
    m2: np.ndarray
    m2_im: np.ndarray
    n: int = 0
    label: str = ""

    @classmethod
    def empty(cls, t_grid, label: str = "") -> "TimeSeriesEstimate":
        t_grid = np.asarray(t_grid)
        z = np.zeros(t_grid.shape[0])
        return cls(t_grid, z.astype(np.complex128), z.copy(), z.copy(), 0, label)

    @classmethod
    def from_samples(cls, t_grid, samples, label: str = "") -> "TimeSeriesEstimate":
        """Two-pass statistics of an ``(n, len(t_grid))`` sample array."""
        x = np.asarray(samples, dtype=np.complex128)
        t_grid = np.asarray(t_grid)
        if x.ndim != 2 or x.shape[1] != t_grid.shape[0]:
            raise DimensionError(f"samples shape {x.shape} does not match grid {t_grid.shape}")
        if x.shape[0] == 0:
            return cls.empty(t_grid, label)
        mean = x.mean(axis=0)
        dev = x - mean
        m2 = np.sum(dev.real ** 2, axis=0)
        m2_im = np.sum(dev.imag ** 2, axis=0)
        return cls(t_grid, mean, m2, m2_im, x.shape[0], label)

    def push(self, sample) -> None:
        """Welford single-sample update, in place."""
        x = np.asarray(sample, dtype=np.complex128)
        self.n += 1
        delta = x - self.mean
        self.mean = self.mean + delta / self.n
        delta2 = x - self.mean
        self.m2 = self.m2 + delta.real * delta2.real
        self.m2_im = self.m2_im + delta.imag * delta2.imag

    def variance(self) -> np.ndarray:
        return self.m2 / (self.n - 1)

    def stderr(self) -> np.ndarray:
        if self.n < 2:
            raise ParameterError("stderr needs at least 2 samples")
        return np.sqrt(self.m2 / (self.n * (self.n - 1)))

    def stderr_im(self) -> np.ndarray:
        if self.n < 2:
            raise ParameterError("stderr needs at least 2 samples")
        return np.sqrt(self.m2_im / (self.n * (self.n - 1)))

    def window(self, t_min: int, t_max: int) -> np.ndarray:
        return (self.t_grid >= t_min) & (self.t_grid <= t_max)


def welford_merge(a: TimeSeriesEstimate, b: TimeSeriesEstimate) -> TimeSeriesEstimate:
    """Chan et al. pairwise combination of two estimates on the same grid."""
    if a.t_grid.shape != b.t_grid.shape or np.any(a.t_grid != b.t_grid):
        raise DimensionError("cannot merge estimates on different time grids")
    if a.label != b.label:
        raise DimensionError(f"cannot merge estimates labelled {a.label!r} and {b.label!r}")
    if b.n == 0:
        return TimeSeriesEstimate(a.t_grid, a.mean.copy(), a.m2.copy(), a.m2_im.copy(), a.n, a.label)
    if a.n == 0:
        return TimeSeriesEstimate(b.t_grid, b.mean.copy(), b.m2.copy(), b.m2_im.copy(), b.n, b.label)
    n = a.n + b.n
    delta = b.mean - a.mean
    mean = a.mean + delta * (b.n / n)
    w = a.n * b.n / n
    m2 = a.m2 + b.m2 + delta.real ** 2 * w
    m2_im = a.m2_im + b.m2_im + delta.imag ** 2 * w
    return TimeSeriesEstimate(a.t_grid, mean, m2, m2_im, n, a.label)


def merge_tree(parts):
    """Merge a sequence of estimates with a fixed, balanced binary tree."""
    parts = list(parts)
    if not parts:
        raise ValueError("nothing to merge")
    if len(parts) == 1:
        return parts[0]
    mid = len(parts) // 2
    return welford_merge(merge_tree(parts[:mid]), merge_tree(parts[mid:]))


# --- per-realization series --------------------------------------------------


def realization_series(params: ModelParams, i: int, pair=None):
    """``(K_i(t), C_i(t))`` for realization ``i``; ``C_i`` is None without observables.

    ``K_i = |tr U^t|^2 / D^2`` and ``C_i = tr(A U^t B U^-t) / D``.
    """
    spec = realization_spectrum(params, params.stream(i))
    t = params.t_grid()
    phase = np.exp(1j * np.outer(t, spec.phases))
    k = np.abs(phase.sum(axis=1)) ** 2 / params.D ** 2
    if pair is None:
        return k, None
    a, b = pair
    v = spec.frame
    ar = v.conj().T @ a @ v
    br = v.conj().T @ b @ v
    m = ar * br.T
    c = np.sum((phase.conj() @ m) * phase, axis=1) / params.D
    return k, c


def _chunk(params: ModelParams, start: int, stop: int, pair):
    t = params.t_grid()
    ks, cs = [], []
    with threadpool_limits(limits=1):
        for i in range(start, stop):
            k, c = realization_series(params, i, pair)
            ks.append(k)
            if c is not None:
                cs.append(c)
    out = {"sff": TimeSeriesEstimate.from_samples(t, np.array(ks), "sff")}
    if pair is not None:
        cs = np.array(cs)
        ab = np.trace(pair[0] @ pair[1]) / params.D
        out["two_point"] = TimeSeriesEstimate.from_samples(t, cs, "two_point")
        out["delta"] = TimeSeriesEstimate.from_samples(t, cs - ab * np.array(ks), "delta")
    return out


def _chunk_star(args):
    return _chunk(*args)


@dataclass
class EnsembleResult:
    """Pooled estimates from one ensemble run.

    ``delta`` is the paired per-realization difference ``C_i - <AB> K_i``,
    i.e. the measured departure from the free-probability identity.
    """

    params: ModelParams
    sff: TimeSeriesEstimate
    two_point: TimeSeriesEstimate | None = None
    delta: TimeSeriesEstimate | None = None
    ab: complex | None = None
    wall_time: float = field(default=0.0, compare=False)

    @property
    def seconds_per_sample(self) -> float:
        return self.wall_time / self.params.n_samples


def chunk_bounds(n: int, chunk_size: int = DEFAULT_CHUNK):
    return [(s, min(s + chunk_size, n)) for s in range(0, n, chunk_size)]


def run_ensemble(
    params: ModelParams,
    A: Observable | None = None,
    B: Observable | None = None,
    *,
    workers: int = 1,
    chunk_size: int = DEFAULT_CHUNK,
) -> EnsembleResult:
    """Evaluate all realizations and pool them; the result is independent of ``workers``."""
    if params.n_samples < 2:
        raise ParameterError("n_samples must be >= 2 for standard errors")
    if workers < 1:
        raise ParameterError(f"workers must be >= 1, got {workers}")
    if (A is None) != (B is None):
        raise ParameterError("pass both observables or neither")
    pair = None
    if A is not None:
        for name, obs in (("A", A), ("B", B)):
            if obs.dim != params.D:
                raise DimensionError(f"observable {name} has dim {obs.dim}, model has D={params.D}")
        pair = (np.asarray(A.matrix), np.asarray(B.matrix))

    tasks = [(params, s, e, pair) for s, e in chunk_bounds(params.n_samples, chunk_size)]
    t0 = time.perf_counter()
    if workers == 1 or len(tasks) == 1:
        parts = [_chunk_star(task) for task in tasks]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
            parts = list(pool.map(_chunk_star, tasks))
    wall = time.perf_counter() - t0

    pooled = {key: merge_tree(p[key] for p in parts) for key in parts[0]}
    ab = None if pair is None else complex(np.trace(pair[0] @ pair[1]) / params.D)
    return EnsembleResult(
        params, pooled["sff"], pooled.get("two_point"), pooled.get("delta"), ab, wall
    )


def sff_run(params: ModelParams, *, workers: int = 1, chunk_size: int = DEFAULT_CHUNK):
    """Ensemble-averaged form factor ``K(t) = E|tr U^t|^2 / D^2``."""
    return run_ensemble(params, workers=workers, chunk_size=chunk_size).sff


def two_point_run(params: ModelParams, A: Observable, B: Observable, *, workers: int = 1,
                  chunk_size: int = DEFAULT_CHUNK):
    """Ensemble-averaged ``<A B_t> = E tr(A U^t B U^-t) / D``."""
    return run_ensemble(params, A, B, workers=workers, chunk_size=chunk_size).two_point


# --- comparison to theory ----------------------------------------------------


@dataclass
class ResidualReport:
    t: np.ndarray
    z: np.ndarray
    flagged: np.ndarray
    threshold: float = 4.0

    @property
    def valid(self) -> np.ndarray:
        return ~self.flagged

    @property
    def fraction_within(self) -> float:
        v = self.valid
        return float(np.mean(np.abs(self.z[v]) <= self.threshold)) if v.any() else float("nan")

    @property
    def chi2_dof(self) -> float:
        v = self.valid
        return float(np.mean(self.z[v] ** 2)) if v.any() else float("nan")

    def passed(self, min_fraction: float = 0.95) -> bool:
        return bool(self.fraction_within >= min_fraction)

    def summary(self) -> dict:
        return {
            "n_points": int(self.valid.sum()),
            "n_flagged": int(self.flagged.sum()),
            "fraction_within": self.fraction_within,
            "threshold": self.threshold,
            "chi2_dof": self.chi2_dof,
            "pass": self.passed(),
        }


def residuals(measured: TimeSeriesEstimate, theory, *, t_min: int | None = None,
              t_max: int | None = None, threshold: float = 4.0) -> ResidualReport:
    """z-scores ``(Re mean - theory) / stderr`` on an optional time window.

    Points with zero standard error are flagged and left out of the pooled
    statistics.
    """
    theory = np.asarray(theory, dtype=float)
    if theory.shape != measured.t_grid.shape:
        raise DimensionError(f"theory shape {theory.shape} does not match grid {measured.t_grid.shape}")
    lo = measured.t_grid.min() if t_min is None else t_min
    hi = measured.t_grid.max() if t_max is None else t_max
    sel = measured.window(lo, hi)
    se = measured.stderr()[sel]
    diff = measured.mean.real[sel] - theory[sel]
    flagged = ~(se > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(flagged, 0.0, diff / np.where(flagged, 1.0, se))
    if math.isnan(float(np.sum(z))):
        raise ParameterError("non-finite z-scores")
    return ResidualReport(measured.t_grid[sel], z, flagged, threshold)
