"""Closed-form soliton families and their parameter derivatives.

With ``a = 2/(p-1)`` and ``D = 1 + d*y + nu`` the generalized soliton is

    k1 = kappa0 (1-d^2)^{1/(p-1)} D^{-a},    k2 = nu * dk1/dnu = -a nu k1 / D,

and ``kappa(d) = k1(d, 0)``.  All fractional powers are taken of strictly
positive bases through ``exp``/``log``; admissible parameters keep ``D``
positive on the closed interval.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ParameterError
from .spectral import Field, Grid, StatePair, norm_H

__all__ = [
    "DOMAIN_MARGIN",
    "SolitonParams",
    "kappa0",
    "kappa",
    "kappa_values",
    "kappa_star",
    "kappa_star_values",
    "dkappa_star_dd",
    "dkappa_star_dnu",
    "u_hat",
    "lambda_dn",
    "residual_selfsim_1d",
]

# smallest allowed value of 1 + d*y + nu on [-1, 1]
DOMAIN_MARGIN = 1e-8


def _pow(base, expo):
    return np.exp(expo * np.log(base))


def _check_p(p: float) -> None:
    if not np.isfinite(p) or p <= 1.0:
        raise ParameterError(f"nonlinearity exponent must satisfy p > 1, got {p!r}")


def _check_d(d: float) -> None:
    if not np.isfinite(d) or abs(d) >= 1.0:
        raise ParameterError(f"|d| must be < 1, got d={d!r}")


@dataclass(frozen=True)
class SolitonParams:
    """Modulation pair ``(d, nu)`` with ``|d| < 1`` and ``1 + nu - |d| > 0``."""

    d: float
    nu: float

    def __post_init__(self):
        _check_d(self.d)
        if not np.isfinite(self.nu) or 1.0 + self.nu - abs(self.d) < DOMAIN_MARGIN:
            raise ParameterError(f"need nu > -1 + |d| (with margin), got d={self.d!r}, nu={self.nu!r}")

    @property
    def dstar(self) -> float:
        return self.d / (1.0 + self.nu)

    @property
    def xi_star(self) -> float:
        return -float(np.arctanh(self.dstar))

    @property
    def scaled_nu(self) -> float:
        """``nu / (1 - |d|)``, the coordinate used by the modulation solver."""
        return self.nu / (1.0 - abs(self.d))

    @classmethod
    def is_admissible(cls, d: float, nu: float) -> bool:
        return bool(np.isfinite(d) and np.isfinite(nu) and abs(d) < 1.0 and 1.0 + nu - abs(d) >= DOMAIN_MARGIN)


def kappa0(p: float) -> float:
    """``(2(p+1)/(p-1)^2)^{1/(p-1)}``: the constant self-similar profile."""
    _check_p(p)
    return float(_pow(2.0 * (p + 1.0) / (p - 1.0) ** 2, 1.0 / (p - 1.0)))


def kappa_star_values(d: float, nu: float, y, p: float) -> tuple[np.ndarray, np.ndarray]:
    """``(k1, k2)`` of the generalized soliton at arbitrary points ``y``."""
    a = 2.0 / (p - 1.0)
    D = 1.0 + d * np.asarray(y, dtype=float) + nu
    if np.any(D <= 0.0):
        raise DomainError("1 + d*y + nu must stay positive")
    k1 = kappa0(p) * _pow(1.0 - d * d, 1.0 / (p - 1.0)) * _pow(D, -a)
    return k1, -a * nu * k1 / D


def kappa_values(d: float, y, p: float) -> np.ndarray:
    _check_d(d)
    return kappa_star_values(d, 0.0, y, p)[0]


def kappa(d: float, grid: Grid) -> Field:
    """Stationary soliton ``kappa0 ((1-d^2)/(1+dy)^2)^{1/(p-1)}``."""
    return Field(kappa_values(d, grid.nodes, grid.p), grid)


def kappa_star(params: SolitonParams, grid: Grid) -> StatePair:
    k1, k2 = kappa_star_values(params.d, params.nu, grid.nodes, grid.p)
    return StatePair(Field(k1, grid), Field(k2, grid))


def _partials(params: SolitonParams, y: np.ndarray, p: float):
    d, nu = params.d, params.nu
    a = 2.0 / (p - 1.0)
    D = 1.0 + d * y + nu
    k1, _ = kappa_star_values(d, nu, y, p)
    d_k1_dd = k1 * (-2.0 * d / ((p - 1.0) * (1.0 - d * d)) - a * y / D)
    d_k1_dnu = -a * k1 / D
    d_k2_dd = -a * nu * (d_k1_dd / D - k1 * y / D**2)
    d_k2_dnu = -a * k1 / D + nu * a * (a + 1.0) * k1 / D**2
    return d_k1_dd, d_k2_dd, d_k1_dnu, d_k2_dnu


def dkappa_star_dd(params: SolitonParams, grid: Grid) -> StatePair:
    d1, d2, _, _ = _partials(params, grid.nodes, grid.p)
    return StatePair(Field(d1, grid), Field(d2, grid))


def dkappa_star_dnu(params: SolitonParams, grid: Grid) -> StatePair:
    _, _, n1, n2 = _partials(params, grid.nodes, grid.p)
    return StatePair(Field(n1, grid), Field(n2, grid))


def u_hat(d, nu, r0, T, r, t, *, p: float):
    """Explicit family ``kappa0 (1-d^2)^{1/(p-1)} / ((1+nu)(T-t) + d(r-r0))^{2/(p-1)}``.

    Vectorised over ``r`` and ``t``.
    """
    _check_p(p)
    _check_d(d)
    den = (1.0 + nu) * (np.asarray(T, dtype=float) - t) + d * (np.asarray(r, dtype=float) - r0)
    if np.any(den <= 0.0):
        raise DomainError("u_hat denominator (1+nu)(T-t) + d(r-r0) must be positive")
    out = kappa0(p) * _pow(1.0 - d * d, 1.0 / (p - 1.0)) * _pow(den, -2.0 / (p - 1.0))
    return float(out) if np.ndim(out) == 0 else out


def lambda_dn(params: SolitonParams, p: float) -> float:
    """Amplitude factor ``((1-d^2)/((1+nu)^2-d^2))^{1/(p-1)}``."""
    _check_p(p)
    d, nu = params.d, params.nu
    den = (1.0 + nu) ** 2 - d * d
    if den <= 0.0:
        raise DomainError("(1+nu)^2 - d^2 must be positive")
    return float(_pow((1.0 - d * d) / den, 1.0 / (p - 1.0)))


def residual_selfsim_1d(d: float, mu: float, s: float, grid: Grid) -> float:
    """H-norm of the one-dimensional residual along ``kappa*(d, mu e^s)``.

    The orbit's time derivative is ``nu d/dnu kappa*``; the first component
    of the residual vanishes identically, the second is compared with the
    right-hand side of the similarity equation without the radial term.
    """
    nu = mu * np.exp(s)
    params = SolitonParams(d, nu)
    p = grid.p
    y = grid.nodes
    k1, k2 = kappa_star_values(d, nu, y, p)
    _, _, n1, n2 = _partials(params, y, p)
    rhs2 = (
        grid.lmat @ k1
        - 2.0 * (p + 1.0) / (p - 1.0) ** 2 * k1
        + np.abs(k1) ** (p - 1.0) * k1
        - (p + 3.0) / (p - 1.0) * k2
        - 2.0 * y * (grid.diff @ k2)
    )
    res = StatePair(Field(nu * n1 - k2, grid), Field(nu * n2 - rhs2, grid))
    return norm_H(res)
