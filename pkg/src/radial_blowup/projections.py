"""Dual directions ``W^d_lambda`` (lambda = 0, 1) and the projectors ``pi^d_lambda``.

The second components are closed forms::

    W_{1,2} = c_1(d) (1-y^2) / (1+dy)^{a+1},    W_{0,2} = c_0(d) (y+d) / (1+dy)^{a+1},

with ``a = 2/(p-1)`` and ``c_lambda(d) = c_lambda (1-d^2)^{1/(p-1)}``.  The first
component solves ``(-L + 1) r = g_lambda`` where

    g_lambda = (lambda - (p+3)/(p-1)) r2 - 2 y r2' + 8/(p-1) r2/(1-y^2).

``pi`` pairs through that equation instead of through ``W_{lambda,1}``:
``phi(W, v) = int (v1 g_lambda + v2 W_{lambda,2}) rho``.  This avoids the
logarithmic endpoint behaviour of ``W_{0,1}``, which limits any polynomial
approximation of it to algebraic convergence.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import NumericalError, ParameterError
from .spectral import Field, Grid, StatePair, _same_grid, integrate

__all__ = [
    "ProjectorSet",
    "base_c_lambda",
    "c_lambda",
    "c_lambda_of_d",
    "w_lambda2",
    "w_lambda2_values",
    "w_lambda1",
    "w_lambda1_rhs",
    "projector_set",
    "pi",
    "pi_direct",
]


def _check(lam: int, d: float) -> None:
    if lam not in (0, 1):
        raise ParameterError(f"lambda must be 0 or 1, got {lam!r}")
    if not np.isfinite(d) or abs(d) >= 1.0:
        raise ParameterError(f"|d| must be < 1, got d={d!r}")


@functools.lru_cache(maxsize=256)
def _base_c(lam: int, n: int, p: float) -> float:
    from .spectral import build_grid

    g = build_grid(n, p)
    a = g.alpha
    if lam == 1:
        moment = float(np.sum(g.quad_weights))
    else:
        moment = float(np.sum(g.aux_weights * g.aux_nodes**2))
    return 1.0 / (2.0 * (lam + a) * moment)


def base_c_lambda(lam: int, p: float, grid: Grid) -> float:
    """``c_lambda`` from ``1/c = 2(lambda + 2/(p-1)) int (y^2/(1-y^2))^{1-lambda} rho``."""
    _check(lam, 0.0)
    if p != grid.p:
        raise ParameterError("p does not match the grid")
    return _base_c(lam, grid.n, grid.p)


def c_lambda_of_d(lam: int, d: float, p: float, grid: Grid) -> float:
    _check(lam, d)
    return base_c_lambda(lam, p, grid) * (1.0 - d * d) ** (1.0 / (p - 1.0))


# operation name used by callers that follow the original notation
c_lambda = c_lambda_of_d


def w_lambda2_values(lam: int, d: float, y, grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    """``W_{lambda,2}`` and its y-derivative at arbitrary points ``y``."""
    _check(lam, d)
    a = grid.alpha
    y = np.asarray(y, dtype=float)
    c = c_lambda_of_d(lam, d, grid.p, grid)
    B = 1.0 + d * y
    if lam == 1:
        r = c * (1.0 - y * y) * B ** (-a - 1.0)
        rp = c * (-2.0 * y * B ** (-a - 1.0) - (a + 1.0) * d * (1.0 - y * y) * B ** (-a - 2.0))
    else:
        r = c * (y + d) * B ** (-a - 1.0)
        rp = c * (B ** (-a - 1.0) - (a + 1.0) * d * (y + d) * B ** (-a - 2.0))
    return r, rp


def w_lambda2(lam: int, d: float, grid: Grid) -> Field:
    return Field(w_lambda2_values(lam, d, grid.nodes, grid)[0], grid)


def w_lambda1_rhs(lam: int, d: float, grid: Grid) -> np.ndarray:
    """Nodal right-hand side ``g_lambda`` of the equation for ``W_{lambda,1}``."""
    p = grid.p
    y = grid.nodes
    r2, r2p = w_lambda2_values(lam, d, y, grid)
    return (lam - (p + 3.0) / (p - 1.0)) * r2 - 2.0 * y * r2p + 8.0 / (p - 1.0) * r2 / (1.0 - y * y)


def w_lambda1(lam: int, d: float, grid: Grid) -> Field:
    """Collocation solution of ``(-L + 1) r = g_lambda`` on the grid.

    ``L`` maps polynomials of degree k to degree k, so the square collocation
    system needs no boundary rows.
    """
    g = w_lambda1_rhs(lam, d, grid)
    A = np.eye(grid.n) - grid.lmat
    try:
        sol = scipy.linalg.solve(A, g)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise NumericalError(f"W_{lam},1 collocation system is singular") from exc
    if not np.all(np.isfinite(sol)):
        raise NumericalError(f"W_{lam},1 solve produced non-finite values")
    return Field(sol, grid)


@dataclass(frozen=True)
class ProjectorSet:
    d: float
    W0: StatePair
    W1: StatePair
    c0: float
    c1: float

    def W(self, lam: int) -> StatePair:
        return self.W1 if lam == 1 else self.W0


def projector_set(d: float, grid: Grid) -> ProjectorSet:
    W = {}
    for lam in (0, 1):
        W[lam] = StatePair(w_lambda1(lam, d, grid), w_lambda2(lam, d, grid))
    return ProjectorSet(
        d=d,
        W0=W[0],
        W1=W[1],
        c0=c_lambda_of_d(0, d, grid.p, grid),
        c1=c_lambda_of_d(1, d, grid.p, grid),
    )


def pi(lam: int, d: float, v: StatePair) -> float:
    """Projection ``phi(W^d_lambda, v)``, evaluated in integrated-by-parts form."""
    _check(lam, d)
    grid = v.grid
    p = grid.p
    y = grid.nodes
    v1 = v.first.values
    r2, r2p = w_lambda2_values(lam, d, y, grid)
    regular = integrate(grid, v1 * ((lam - (p + 3.0) / (p - 1.0)) * r2 - 2.0 * y * r2p) + v.second.values * r2)
    r2_aux, _ = w_lambda2_values(lam, d, grid.aux_nodes, grid)
    singular = float(np.sum(grid.aux_weights * (grid.to_aux @ v1) * r2_aux))
    return regular + 8.0 / (p - 1.0) * singular


def pi_direct(lam: int, projectors: ProjectorSet, v: StatePair) -> float:
    """``phi(W_lambda, v)`` using the collocated ``W_{lambda,1}`` (cross-check)."""
    from .spectral import inner_phi

    W = projectors.W(lam)
    _same_grid(W.grid, v.grid)
    return inner_phi(W, v)
