"""Reproducible random sampling: Ginibre, Haar (CUE) and Gaussian couplings.

Every draw is tied to a :class:`SeedStream`.  A stream is the pair
``(master_seed, stream_id)`` fed to numpy's ``SeedSequence`` as entropy and
spawn key, so two streams with different ids are statistically independent
and a given pair always reproduces the same bits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .linalg import UnitaryMatrix

_U64 = 2 ** 64


@dataclass(frozen=True)
class SeedStream:
    master_seed: int
    stream_id: int

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(self.master_seed, spawn_key=(self.stream_id,))
        return np.random.Generator(np.random.PCG64(seq))


def derive_stream(master_seed: int, stream_id: int) -> SeedStream:
    for name, value in (("master_seed", master_seed), ("stream_id", stream_id)):
        if not isinstance(value, (int, np.integer)) or isinstance(value, bool):
            raise ParameterError(f"{name} must be an integer, got {value!r}")
        if not 0 <= int(value) < _U64:
            raise ParameterError(f"{name} must fit in 64 unsigned bits, got {value}")
    return SeedStream(int(master_seed), int(stream_id))


def _rng(source) -> np.random.Generator:
    if isinstance(source, SeedStream):
        return source.generator()
    if isinstance(source, np.random.Generator):
        return source
    raise TypeError(f"expected SeedStream or numpy Generator, got {type(source).__name__}")


def sample_ginibre(dim: int, stream, *, rows: int | None = None) -> np.ndarray:
    """``dim x dim`` matrix of i.i.d. complex normals with ``E|z|^2 = 1``.

    Accepts a live ``Generator`` as well as a ``SeedStream`` so that several
    matrices of one realization can be drawn from a single stream.
    """
    if dim < 1:
        raise ParameterError(f"dimension must be >= 1, got {dim}")
    rng = _rng(stream)
    shape = (rows or dim, dim)
    z = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return z * (1.0 / math.sqrt(2.0))


def haar_from_ginibre(z: np.ndarray) -> np.ndarray:
    # Phase fix: rescale columns of Q so R has a positive real diagonal.
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def sample_haar(dim: int, stream) -> UnitaryMatrix:
    """Haar-distributed unitary via phase-corrected QR of a Ginibre matrix."""
    return UnitaryMatrix.certify(haar_from_ginibre(sample_ginibre(dim, stream)), tol=1e-12)


def coupling_scale(d0: int, gamma: float) -> float:
    """Standard deviation factor so that ``E|W_ij|^2 = g^2 / (2 D0) = gamma / D0``."""
    if not gamma > 0 or not math.isfinite(gamma):
        raise ParameterError(f"gamma must be > 0, got {gamma}")
    if d0 < 1:
        raise ParameterError(f"D0 must be >= 1, got {d0}")
    return math.sqrt(gamma / d0)


def sample_coupling(d0: int, gamma: float, stream) -> np.ndarray:
    """Gaussian coupling matrix ``W`` with ``E tr(W W^dagger) = D0 * gamma``."""
    scale = coupling_scale(d0, gamma)
    return scale * sample_ginibre(d0, stream)
