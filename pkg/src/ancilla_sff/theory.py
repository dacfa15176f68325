"""Closed-form predictions for the ancilla model.

Pair propagators :math:`\\pi_\\lambda(u) = \\theta(u) e^{-\\gamma_\\lambda u} / D`
with rates ``(0, gamma, gamma, 2 gamma)`` (singlet, two degenerate triplets,
the 3-axis triplet).  All form factors use the normalization where the
plateau is ``1/D``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, NumericalError, ParameterError
from .model import ModelParams, Observable, ancilla_pauli

FORMULAS = ("ramp_eq4", "full_plateau", "delta", "two_point", "mode_conv")
DEFAULT_EPS = (1e-4, 1e-5)
CYCLIC_PERMS = ((1, 2, 3), (2, 3, 1), (3, 1, 2))


class FreenessRegimeWarning(UserWarning):
    """Observables are not traceless in both factors; the Delta formula does not apply."""


@dataclass(frozen=True)
class ModeRates:
    rates: tuple

    @classmethod
    def from_gamma(cls, gamma: float) -> "ModeRates":
        return cls((0.0, gamma, gamma, 2.0 * gamma))

    def __getitem__(self, k):
        return self.rates[k]

    def __len__(self):
        return len(self.rates)


@dataclass(frozen=True)
class TheoryCurve:
    t_grid: np.ndarray
    values: np.ndarray
    formula_id: str


def _rates(params: ModelParams) -> ModeRates:
    return ModeRates.from_gamma(params.gamma)


def mode_pi(lam: int, u, params: ModelParams):
    """``theta(u) exp(-gamma_lam u) / D`` with ``theta(0) = 1``."""
    if lam not in (0, 1, 2, 3):
        raise ParameterError(f"mode index must be 0..3, got {lam}")
    u = np.asarray(u, dtype=float)
    g = _rates(params)[lam]
    out = np.where(u >= 0, np.exp(-g * np.maximum(u, 0.0)), 0.0) / params.D
    return out if out.ndim else float(out)


def discrete_conv(a: int, b: int, t: int, params: ModelParams) -> float:
    """``sum_{u=1}^{t} pi_a(t-u) pi_b(u)``."""
    if t < 1:
        raise ParameterError(f"discrete convolution needs t >= 1, got {t}")
    u = np.arange(1, int(t) + 1)
    return float(np.sum(mode_pi(a, t - u, params) * mode_pi(b, u, params)))


def continuum_conv(a: int, b: int, t, params: ModelParams):
    """``int_0^t pi_a(t-u) pi_b(u) du`` in closed form."""
    r = _rates(params)
    ga, gb = r[a], r[b]
    t = np.asarray(t, dtype=float)
    if ga == gb:
        out = t * np.exp(-ga * t)
    else:
        out = (np.exp(-gb * t) - np.exp(-ga * t)) / (ga - gb)
    out = out / params.D ** 2
    return out if out.ndim else float(out)


def sff_ramp(t, params: ModelParams):
    """``(t / D^2)(1 + 2 e^{-gamma t} + e^{-2 gamma t})``."""
    t = np.asarray(t, dtype=float)
    g = params.gamma
    out = t / params.D ** 2 * (1.0 + 2.0 * np.exp(-g * t) + np.exp(-2.0 * g * t))
    return out if out.ndim else float(out)


def calK(k: int, rates) -> float:
    """Literal product ``prod_{k' != 0, k} g_k'^2 / (g_k'^2 - g_k^2)``.

    Raises ``NumericalError`` when a partner rate coincides with ``g_k``;
    the plateau formula handles the model's degenerate pair separately.
    """
    rates = tuple(rates.rates if isinstance(rates, ModeRates) else rates)
    if k == 0:
        raise ParameterError("calK is undefined for the singlet mode k=0")
    if not 0 < k < len(rates):
        raise ParameterError(f"mode index {k} out of range")
    gk = rates[k]
    if not gk > 0:
        raise ParameterError(f"rate of mode {k} must be positive")
    out = 1.0
    for j, gj in enumerate(rates):
        if j in (0, k):
            continue
        den = gj ** 2 - gk ** 2
        if den == 0:
            raise NumericalError(f"calK({k}) diverges: degenerate rates {gj} = {gk}")
        out *= gj ** 2 / den
    return out


def _plateau_sum(t, d: int, rates) -> np.ndarray:
    """``sum_{k != 0} calK(k) / (2 g_k) (e^{-g_k |t-D|} + e^{-g_k (t+D)})`` for distinct rates."""
    t = np.asarray(t, dtype=float)
    total = np.zeros_like(t)
    for k in range(1, len(rates)):
        gk = rates[k]
        total += calK(k, rates) / (2.0 * gk) * (np.exp(-gk * np.abs(t - d)) + np.exp(-gk * (t + d)))
    return total


def _split_rates(rates, eps: float):
    """Lift exact degeneracies by symmetric relative splitting ``g(1 -+ eps)``."""
    r = list(rates)
    seen = {}
    for i in range(1, len(r)):
        seen.setdefault(r[i], []).append(i)
    for g, idx in seen.items():
        m = len(idx)
        if m > 1:
            for j, i in enumerate(idx):
                r[i] = g * (1.0 + eps * (2 * j - (m - 1)) / max(m - 1, 1))
    return tuple(r)


def plateau_correction(t, d: int, rates, eps=DEFAULT_EPS) -> np.ndarray:
    """The non-perturbative plateau term, regularized when rates are degenerate.

    Degenerate rates are split as ``g(1 -+ eps)``.  The symmetric split makes
    the error even in ``eps``, so two splittings are combined by a
    second-order Richardson step.
    """
    rates = tuple(rates.rates if isinstance(rates, ModeRates) else rates)
    if len(set(rates[1:])) == len(rates) - 1:
        return _plateau_sum(t, d, rates)
    e1, e2 = eps
    s1 = _plateau_sum(t, d, _split_rates(rates, e1))
    s2 = _plateau_sum(t, d, _split_rates(rates, e2))
    return (e1 ** 2 * s2 - e2 ** 2 * s1) / (e1 ** 2 - e2 ** 2)


def sff_full(t, params: ModelParams, *, rates=None, eps=DEFAULT_EPS):
    """Ramp-plateau form factor, normalized so that ``K(t -> inf) = 1/D``."""
    rates = tuple(rates.rates if isinstance(rates, ModeRates) else rates) if rates is not None \
        else _rates(params).rates
    t = np.asarray(t, dtype=float)
    d = params.D
    ramp = t * np.sum(np.exp(-np.outer(t, rates)), axis=1).reshape(t.shape)
    heaviside = np.where(t > d, t - d, 0.0)
    out = (ramp - heaviside - plateau_correction(t, d, rates, eps)) / d ** 2
    return out if out.ndim else float(out)


def _perm_key(perm) -> tuple:
    if isinstance(perm, str):
        perm = tuple(int(c) for c in perm.strip("()"))
    perm = tuple(perm)
    if perm not in CYCLIC_PERMS:
        raise ParameterError(f"permutation must be one of (123), (231), (312), got {perm}")
    return perm


def f_ijk(perm, t, params: ModelParams):
    """``F_ijk = pi_0 * pi_k - pi_i * pi_j`` (continuum convolutions) in closed form."""
    perm = _perm_key(perm)
    t = np.asarray(t, dtype=float)
    g, d2 = params.gamma, params.D ** 2
    if perm == (1, 2, 3):
        out = (-np.expm1(-2.0 * g * t)) / (2.0 * g * d2) - t * np.exp(-g * t) / d2
    else:
        out = np.expm1(-g * t) ** 2 / (g * d2)
    return out if out.ndim else float(out)


def ancilla_traces(params: ModelParams, A: Observable, B: Observable) -> dict:
    """``<A sigma_k B sigma_k>`` for k = 1, 2, 3, with sigma_k on the ancilla."""
    if A.dim != params.D or B.dim != params.D:
        raise DimensionError(f"observables must be {params.D}-dimensional")
    a, b = np.asarray(A.matrix), np.asarray(B.matrix)
    out = {}
    for k in (1, 2, 3):
        s = ancilla_pauli(k, params.D0)
        out[k] = complex(np.trace(a @ s @ b @ s) / params.D)
    return out


def _check_regime(A: Observable, B: Observable) -> None:
    for name, obs in (("A", A), ("B", B)):
        if not (obs.traceless_env and obs.traceless_anc):
            warnings.warn(
                f"observable {name} is not traceless in both factors; "
                "the Delta(t) formula is outside its regime",
                FreenessRegimeWarning,
                stacklevel=3,
            )


def _real(x):
    x = np.real_if_close(x, tol=1e6)
    return x if np.ndim(x) else x.item()


def delta_theory(t, params: ModelParams, A: Observable, B: Observable):
    """``Delta(t) = 2 sum_cyclic F_ijk(t) <A sigma_k B sigma_k>``."""
    _check_regime(A, B)
    tr = ancilla_traces(params, A, B)
    total = 0.0
    for perm in CYCLIC_PERMS:
        total = total + f_ijk(perm, t, params) * tr[perm[2]]
    return _real(2.0 * np.asarray(total))


def two_point_theory(t, params: ModelParams, A: Observable, B: Observable, *, plateau: bool = True):
    """``K(t) <AB> + Delta(t)``, with ``K`` the full ramp-plateau form or the ramp alone."""
    ab = complex(np.trace(np.asarray(A.matrix) @ np.asarray(B.matrix)) / params.D)
    k = sff_full(t, params) if plateau else sff_ramp(t, params)
    return _real(np.asarray(k) * ab + np.asarray(delta_theory(t, params, A, B)))


def theory_curve(formula_id: str, t_grid, params: ModelParams, A=None, B=None) -> TheoryCurve:
    """Evaluate one named prediction on a grid.

    At ``t = 0`` the form-factor curves report the exact value ``K(0) = 1``
    (``U^0 = 1``) and the two-point curve ``<AB>``.
    """
    if formula_id not in FORMULAS:
        raise ParameterError(f"unknown formula {formula_id!r}; expected one of {FORMULAS}")
    t = np.asarray(t_grid)
    tf = t.astype(float)
    if formula_id == "ramp_eq4":
        v = sff_ramp(tf, params)
    elif formula_id in ("full_plateau", "mode_conv"):
        v = sff_full(tf, params) if formula_id == "full_plateau" else \
            sum(continuum_conv(lam, lam, tf, params) for lam in range(4))
    else:
        if A is None or B is None:
            raise ParameterError(f"formula {formula_id!r} needs observables A and B")
        v = delta_theory(tf, params, A, B) if formula_id == "delta" else two_point_theory(tf, params, A, B)
    v = np.array(v, dtype=float)
    if formula_id in ("ramp_eq4", "full_plateau", "mode_conv"):
        v[t == 0] = 1.0
    elif formula_id == "two_point":
        v[t == 0] = np.real(np.trace(np.asarray(A.matrix) @ np.asarray(B.matrix)) / params.D)
    if not np.all(np.isfinite(v)):
        raise NumericalError(f"non-finite values in theory curve {formula_id}")
    return TheoryCurve(t, v, formula_id)


def long_time_delta(params: ModelParams, A: Observable, B: Observable) -> float:
    """``lim_{t -> inf} Delta(t)``: F_123 -> 1/(2 g D^2), F_231 = F_312 -> 1/(g D^2)."""
    tr = ancilla_traces(params, A, B)
    g, d2 = params.gamma, params.D ** 2
    val = 2.0 * (tr[3] / (2 * g * d2) + (tr[1] + tr[2]) / (g * d2))
    return float(np.real(val)) if abs(np.imag(val)) < 1e-14 else val

