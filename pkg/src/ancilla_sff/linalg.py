"""Dense complex-matrix kernels.

Matrices are plain ``numpy`` arrays of dtype ``complex128``.  Unitaries and
eigenphase spectra travel in small frozen wrappers that certify their
invariants once, at construction, so downstream code never has to re-check.

The factorizations (QR, SVD, Schur) are LAPACK calls through numpy/scipy.
``expm_oracle`` is a self-contained scaling-and-squaring Pade evaluator and
is only used to cross-check the closed-form coupling unitary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import ContractViolation, DimensionError, NumericalError

UNITARY_TOL = 1e-10
SPECTRAL_TOL = 1e-8


def as_complex_matrix(m) -> np.ndarray:
    """Coerce ``m`` to a finite 2-D ``complex128`` array."""
    a = np.asarray(m, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise DimensionError(f"expected a non-empty 2-D matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NumericalError("matrix contains NaN or Inf entries")
    return a


def _require_square(a: np.ndarray, what: str = "matrix") -> None:
    if a.shape[0] != a.shape[1]:
        raise DimensionError(f"{what} must be square, got shape {a.shape}")


def adjoint(m) -> np.ndarray:
    return np.conj(np.asarray(m)).T


def unitarity_defect(m) -> float:
    """Frobenius norm of ``M^dagger M - 1``."""
    a = as_complex_matrix(m)
    _require_square(a)
    g = a.conj().T @ a
    g[np.diag_indices_from(g)] -= 1.0
    return float(np.linalg.norm(g))


@dataclass(frozen=True, eq=False)
class UnitaryMatrix:
    """A square matrix certified unitary to ``1e-10 * D`` (Frobenius)."""

    matrix: np.ndarray = field(repr=False)
    defect: float

    @classmethod
    def certify(cls, m, tol: float = UNITARY_TOL) -> "UnitaryMatrix":
        a = as_complex_matrix(m)
        _require_square(a, "unitary")
        d = unitarity_defect(a)
        if d > tol * a.shape[0]:
            raise NumericalError(
                f"matrix is not unitary: defect {d:.3e} > {tol * a.shape[0]:.3e}"
            )
        a.setflags(write=False)
        return cls(a, d)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __matmul__(self, other):
        other_m = other.matrix if isinstance(other, UnitaryMatrix) else other
        return self.matrix @ other_m


@dataclass(frozen=True, eq=False)
class EigenphaseSpectrum:
    """Eigenphases in ``(-pi, pi]`` plus the unitary frame diagonalizing the source.

    ``frame`` holds eigenvectors as columns, so ``U = V diag(exp(i*phases)) V^dagger``.
    """

    phases: np.ndarray
    frame: np.ndarray = field(repr=False)
    residual: float = 0.0

    @property
    def dim(self) -> int:
        return self.phases.shape[0]

    def trace_power(self, t) -> np.ndarray:
        """``tr(U^t)`` for each integer in ``t`` (scalar or 1-D array)."""
        t = np.atleast_1d(np.asarray(t))
        return np.exp(1j * np.outer(t, self.phases)).sum(axis=1)


def wrap_phase(theta) -> np.ndarray:
    """Map angles to the half-open branch ``(-pi, pi]``."""
    theta = np.asarray(theta, dtype=float)
    out = np.angle(np.exp(1j * theta))
    return np.where(out <= -np.pi, out + 2 * np.pi, out)


def eigenphases(u: UnitaryMatrix) -> EigenphaseSpectrum:
    """Diagonalize a certified unitary through its complex Schur form.

    For a normal matrix the Schur factor is diagonal and the Schur vectors
    form an orthonormal eigenbasis, even for (near-)degenerate phases.
    """
    if not isinstance(u, UnitaryMatrix):
        u = UnitaryMatrix.certify(u)
    a = u.matrix
    dim = a.shape[0]
    try:
        tri, vecs = scipy.linalg.schur(a, output="complex")
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(
            f"Schur decomposition failed (D={dim}, cond={np.linalg.cond(a):.3e}): {exc}"
        ) from exc
    lam = np.diag(tri)
    phases = np.angle(lam)
    phases[phases <= -np.pi] += 2 * np.pi
    recon = (vecs * np.exp(1j * phases)) @ vecs.conj().T
    residual = float(np.linalg.norm(a - recon))
    if residual > SPECTRAL_TOL * dim:
        off = float(np.linalg.norm(np.triu(tri, 1)))
        raise NumericalError(
            f"eigenphase reconstruction residual {residual:.3e} exceeds "
            f"{SPECTRAL_TOL * dim:.3e} (D={dim}, Schur off-diagonal norm {off:.3e}, "
            f"cond={np.linalg.cond(a):.3e})"
        )
    phases.setflags(write=False)
    return EigenphaseSpectrum(phases, vecs, residual)


def svd(m):
    """Singular value decomposition ``M = left @ diag(sigma) @ right^dagger``.

    Returns ``(left, sigma, right)`` with ``left``/``right`` certified
    unitaries and ``sigma`` non-negative, descending.
    """
    a = as_complex_matrix(m)
    _require_square(a)
    try:
        left, sigma, right_h = np.linalg.svd(a)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD did not converge (D={a.shape[0]}): {exc}") from exc
    return UnitaryMatrix.certify(left), sigma, UnitaryMatrix.certify(right_h.conj().T)


def hermiticity_defect(h) -> float:
    a = as_complex_matrix(h)
    _require_square(a)
    return float(np.linalg.norm(a - a.conj().T))


# Diagonal [13/13] Pade approximant of exp(x); theta_13 from Higham (2005).
_PADE_ORDER = 13
_PADE_THETA = 5.371920351148152
_PADE_COEFFS = tuple(
    math.factorial(2 * _PADE_ORDER - k) * math.factorial(_PADE_ORDER)
    / (math.factorial(2 * _PADE_ORDER) * math.factorial(k) * math.factorial(_PADE_ORDER - k))
    for k in range(_PADE_ORDER + 1)
)


def expm_oracle(h, scale: float) -> np.ndarray:
    """Return ``exp(-i * scale * H)`` for Hermitian ``H``.

    Scaling and squaring around a fixed [13/13] Pade approximant.  Kept
    independent of the SVD route on purpose: this is the reference the
    closed-form coupling unitary is tested against.
    """
    a = as_complex_matrix(h)
    _require_square(a)
    herm = hermiticity_defect(a)
    if herm > 1e-12 * max(1.0, float(np.linalg.norm(a))):
        raise ContractViolation(f"expm_oracle needs Hermitian input, defect {herm:.3e}")

    x = -1j * float(scale) * a
    norm1 = float(np.linalg.norm(x, 1))
    squarings = 0
    if norm1 > _PADE_THETA:
        squarings = int(math.ceil(math.log2(norm1 / _PADE_THETA)))
        x = x / (2.0 ** squarings)

    n = x.shape[0]
    eye = np.eye(n, dtype=np.complex128)
    b = _PADE_COEFFS
    x2 = x @ x
    x4 = x2 @ x2
    x6 = x2 @ x4
    odd = x @ (x6 @ (b[13] * x6 + b[11] * x4 + b[9] * x2)
               + b[7] * x6 + b[5] * x4 + b[3] * x2 + b[1] * eye)
    even = (x6 @ (b[12] * x6 + b[10] * x4 + b[8] * x2)
            + b[6] * x6 + b[4] * x4 + b[2] * x2 + b[0] * eye)
    r = np.linalg.solve(even - odd, even + odd)
    for _ in range(squarings):
        r = r @ r
    return r
