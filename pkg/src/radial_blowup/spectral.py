"""Collocation grids and weighted norms on (-1, 1).

Everything here is built around the weight ``rho(y) = (1 - y**2)**(2/(p-1))``.
Nodes are Gauss-Jacobi points with both Jacobi exponents equal to
``2/(p-1)``, so ``sum(quad_weights * f(nodes))`` integrates ``f * rho``
without ever evaluating the (degenerate) weight.  A second Gauss-Jacobi rule
with exponents ``2/(p-1) - 1`` integrates against ``rho / (1 - y**2)``; it is
used for the singular-weight norm and for terms carrying ``1/(1 - y**2)``.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np
from scipy.special import roots_jacobi

from .errors import GridMismatchError, ParameterError

__all__ = [
    "Grid",
    "Field",
    "StatePair",
    "WeightedNorms",
    "build_grid",
    "barycentric_weights",
    "differentiation_matrix",
    "interpolation_matrix",
    "inner_phi",
    "norm_H",
    "norm_H0",
    "apply_L",
    "weighted_norms",
    "integrate",
    "integrate_singular",
]


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


def barycentric_weights(x: np.ndarray) -> np.ndarray:
    """Barycentric weights ``1 / prod_{k != j}(x_j - x_k)``, rescaled.

    The products are accumulated in log space; only ratios of the weights
    are ever used, so the overall scale is arbitrary.
    """
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    log_abs = np.sum(np.log(np.abs(diff)), axis=1)
    sign = np.prod(np.sign(diff), axis=1)
    return sign * np.exp(-(log_abs - log_abs.max()))


def differentiation_matrix(x: np.ndarray, w: np.ndarray) -> np.ndarray:
    """First-derivative matrix of the interpolant through ``x``."""
    dx = x[:, None] - x[None, :]
    np.fill_diagonal(dx, 1.0)
    D = (w[None, :] / w[:, None]) / dx
    np.fill_diagonal(D, 0.0)
    # negative sum trick: rows annihilate constants exactly
    np.fill_diagonal(D, -D.sum(axis=1))
    return D


def interpolation_matrix(x: np.ndarray, w: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Matrix mapping values at ``x`` to interpolant values at ``z``."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    dz = z[:, None] - x[None, :]
    hit = dz == 0.0
    dz[hit] = 1.0
    M = w[None, :] / dz
    M /= M.sum(axis=1, keepdims=True)
    rows = np.any(hit, axis=1)
    M[rows] = hit[rows].astype(float)
    return M


@dataclass(frozen=True, eq=False)
class Grid:
    """Gauss-Jacobi collocation grid for the weight ``rho`` on (-1, 1).

    Attributes
    ----------
    n, p
        Node count and nonlinearity exponent.
    nodes, quad_weights
        Gauss rule with ``sum(quad_weights * f(nodes)) ~ int f rho dy``.
    diff
        Spectral differentiation matrix (barycentric form).
    lmat
        Matrix of the operator ``(1/rho) d/dy (rho (1-y^2) d/dy)``.
    aux_nodes, aux_weights, to_aux
        Gauss rule for ``rho/(1-y^2)`` and the interpolation matrix from
        ``nodes`` onto ``aux_nodes``.
    """

    n: int
    p: float
    nodes: np.ndarray
    quad_weights: np.ndarray
    diff: np.ndarray
    bary: np.ndarray
    diff2: np.ndarray
    lmat: np.ndarray
    aux_nodes: np.ndarray
    aux_weights: np.ndarray
    to_aux: np.ndarray

    @property
    def alpha(self) -> float:
        """Jacobi exponent ``2/(p-1)``."""
        return 2.0 / (self.p - 1.0)

    @property
    def one_minus_y2(self) -> np.ndarray:
        return 1.0 - self.nodes**2

    def field(self, values) -> "Field":
        return Field(np.asarray(values, dtype=float), self)

    def pair(self, first, second) -> "StatePair":
        return StatePair(self.field(first), self.field(second))

    def interpolate(self, values: np.ndarray, z) -> np.ndarray:
        """Evaluate the interpolant of nodal ``values`` at points ``z``."""
        return interpolation_matrix(self.nodes, self.bary, z) @ np.asarray(values, dtype=float)

    def __repr__(self) -> str:
        return f"Grid(n={self.n}, p={self.p})"


@functools.lru_cache(maxsize=64)
def _cached_grid(n: int, p: float) -> Grid:
    a = 2.0 / (p - 1.0)
    y, wq = roots_jacobi(n, a, a)
    bary = barycentric_weights(y)
    D = differentiation_matrix(y, bary)
    D2 = D @ D
    L = (1.0 - y**2)[:, None] * D2 - (2.0 * (a + 1.0) * y)[:, None] * D
    ya, wa = roots_jacobi(n, a - 1.0, a - 1.0)
    return Grid(
        n=n,
        p=p,
        nodes=_readonly(y),
        quad_weights=_readonly(wq),
        diff=_readonly(D),
        bary=_readonly(bary),
        diff2=_readonly(D2),
        lmat=_readonly(L),
        aux_nodes=_readonly(ya),
        aux_weights=_readonly(wa),
        to_aux=_readonly(interpolation_matrix(y, bary, ya)),
    )


def build_grid(n: int, p: float) -> Grid:
    """Return the Gauss-Jacobi grid with ``n`` nodes for exponent ``p``.

    Grids are cached, so equal ``(n, p)`` give the identical object.
    """
    if int(n) != n or n < 8:
        raise ParameterError(f"grid needs an integer n >= 8, got {n!r}")
    if not np.isfinite(p) or p <= 1.0:
        raise ParameterError(f"nonlinearity exponent must satisfy p > 1, got {p!r}")
    return _cached_grid(int(n), float(p))


def _same_grid(a: Grid, b: Grid) -> None:
    if a is not b and (a.n != b.n or a.p != b.p):
        raise GridMismatchError(f"{a!r} vs {b!r}")


@dataclass(frozen=True, eq=False)
class Field:
    """Nodal values of a scalar function of ``y``."""

    values: np.ndarray
    grid: Grid

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.n,):
            raise ParameterError(f"expected {self.grid.n} nodal values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ParameterError("field values must be finite")
        object.__setattr__(self, "values", v)

    def derivative(self) -> "Field":
        return Field(self.grid.diff @ self.values, self.grid)

    def _other(self, other):
        if isinstance(other, Field):
            _same_grid(self.grid, other.grid)
            return other.values
        return other

    def __add__(self, other):
        return Field(self.values + self._other(other), self.grid)

    __radd__ = __add__

    def __sub__(self, other):
        return Field(self.values - self._other(other), self.grid)

    def __rsub__(self, other):
        return Field(self._other(other) - self.values, self.grid)

    def __mul__(self, other):
        return Field(self.values * self._other(other), self.grid)

    __rmul__ = __mul__

    def __neg__(self):
        return Field(-self.values, self.grid)


@dataclass(frozen=True, eq=False)
class StatePair:
    """Position/velocity pair ``(q1, q2)`` on a common grid."""

    first: Field
    second: Field

    def __post_init__(self):
        _same_grid(self.first.grid, self.second.grid)

    @property
    def grid(self) -> Grid:
        return self.first.grid

    @classmethod
    def zeros(cls, grid: Grid) -> "StatePair":
        z = np.zeros(grid.n)
        return cls(Field(z, grid), Field(z, grid))

    def __add__(self, other: "StatePair") -> "StatePair":
        return StatePair(self.first + other.first, self.second + other.second)

    def __sub__(self, other: "StatePair") -> "StatePair":
        return StatePair(self.first - other.first, self.second - other.second)

    def __mul__(self, c: float) -> "StatePair":
        return StatePair(self.first * c, self.second * c)

    __rmul__ = __mul__

    def __neg__(self) -> "StatePair":
        return StatePair(-self.first, -self.second)


def integrate(grid: Grid, values) -> float:
    """``int f rho dy`` for nodal values ``f`` (pairwise summation)."""
    return float(np.sum(grid.quad_weights * values))


def integrate_singular(grid: Grid, values) -> float:
    """``int f rho/(1-y^2) dy`` for nodal values ``f``.

    ``f`` is interpolated onto the auxiliary nodes first, so the rule is
    exact whenever ``f`` is a polynomial of degree below ``n``.
    """
    return float(np.sum(grid.aux_weights * (grid.to_aux @ values)))


def inner_phi(a: StatePair, b: StatePair) -> float:
    """The inner product ``int (a1 b1 + a1' b1' (1-y^2) + a2 b2) rho dy``."""
    _same_grid(a.grid, b.grid)
    g = a.grid
    da = g.diff @ a.first.values
    db = g.diff @ b.first.values
    integrand = a.first.values * b.first.values + da * db * g.one_minus_y2 + a.second.values * b.second.values
    return integrate(g, integrand)


def norm_H(a: StatePair) -> float:
    return float(np.sqrt(max(inner_phi(a, a), 0.0)))


def norm_H0(f: Field) -> float:
    g = f.grid
    df = g.diff @ f.values
    return float(np.sqrt(max(integrate(g, f.values**2 + df**2 * g.one_minus_y2), 0.0)))


def apply_L(f: Field) -> Field:
    """``(1-y^2) f'' - 2 (2/(p-1) + 1) y f'`` at the nodes.

    Expanded form of ``(1/rho) (rho (1-y^2) f')'`` using the identity
    ``rho'/rho = -(4/(p-1)) y / (1-y^2)``.
    """
    return Field(f.grid.lmat @ f.values, f.grid)


@dataclass(frozen=True)
class WeightedNorms:
    l2_singular: float
    lp1: float
    sup_weighted: float

    @property
    def total(self) -> float:
        return self.l2_singular + self.lp1 + self.sup_weighted


def weighted_norms(f: Field) -> WeightedNorms:
    """The three norms bounded by the Hardy-Sobolev inequality.

    ``||f||_{L^2(rho/(1-y^2))}``, ``||f||_{L^{p+1}(rho)}`` and the nodal
    maximum of ``|f| (1-y^2)^{1/(p-1)}``.
    """
    g = f.grid
    v = f.values
    # interpolate before squaring: exact for polynomial f of degree < n
    l2s = np.sqrt(float(np.sum(g.aux_weights * (g.to_aux @ v) ** 2)))
    lp1 = integrate(g, np.abs(v) ** (g.p + 1.0)) ** (1.0 / (g.p + 1.0))
    sup = float(np.max(np.abs(v) * g.one_minus_y2 ** (1.0 / (g.p - 1.0))))
    return WeightedNorms(float(l2s), float(lp1), sup)
