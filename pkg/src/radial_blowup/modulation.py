"""Modulation: choose ``(d, nu)`` so that ``q = v - kappa*(d, nu)`` satisfies
``pi^{d*}_0(q) = pi^{d*}_1(q) = 0`` with ``d* = d/(1+nu)``.

Newton's method runs in the coordinates ``xi = artanh d`` and
``eta = nu/(1-|d|)``, which stay well scaled as ``|d| -> 1``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .projections import pi
from .solitons import SolitonParams, kappa_star
from .spectral import StatePair, norm_H

log = logging.getLogger(__name__)

__all__ = ["ModulationResult", "dstar", "dstar_band", "modulate", "orthogonality_residuals"]


def dstar(d: float, nu: float) -> float:
    if 1.0 + nu <= 0.0:
        raise ParameterError(f"1 + nu must be positive, got nu={nu!r}")
    return d / (1.0 + nu)


def dstar_band(d: float, nu: float) -> tuple[bool, float]:
    """Whether ``|d*| < 1`` and ``1/2 <= (1-d*^2)/(1-d^2) <= 2``; returns the ratio too."""
    ds = dstar(d, nu)
    ratio = (1.0 - ds * ds) / (1.0 - d * d)
    return bool(abs(ds) < 1.0 and 0.5 <= ratio <= 2.0), float(ratio)


def orthogonality_residuals(v: StatePair, params: SolitonParams) -> np.ndarray:
    q = v - kappa_star(params, v.grid)
    ds = params.dstar
    return np.array([pi(0, ds, q), pi(1, ds, q)])


@dataclass
class ModulationResult:
    params: SolitonParams
    q: StatePair
    residuals: np.ndarray
    iterations: int
    converged: bool
    q_norm: float
    q_hat_norm: float
    message: str = ""
    band_ok: bool = True
    history: list = field(default_factory=list, repr=False)

    @property
    def d(self) -> float:
        return self.params.d

    @property
    def nu(self) -> float:
        return self.params.nu

    @property
    def dstar(self) -> float:
        return self.params.dstar

    @property
    def xi_star(self) -> float:
        return self.params.xi_star

    @property
    def size_certificate(self) -> bool:
        """``||q|| <= ||v - kappa*(init)||`` up to a small slack."""
        return self.q_norm <= self.q_hat_norm * (1.0 + 1e-6) + 1e-10


def _to_params(x: np.ndarray) -> SolitonParams | None:
    xi, eta = x
    d = float(np.tanh(xi))
    nu = float(eta * (1.0 - abs(d)))
    if not SolitonParams.is_admissible(d, nu) or abs(d) >= 1.0 - 1e-14:
        return None
    return SolitonParams(d, nu)


def modulate(
    v: StatePair,
    init: SolitonParams,
    tol: float = 1e-10,
    max_iter: int = 50,
    max_q_norm: float = 1.0,
    band_B: float = 2.0,
) -> ModulationResult:
    """Solve the two orthogonality conditions by damped Newton iteration.

    Parameters
    ----------
    v
        State to decompose.
    init
        Starting guess ``(d, nu)``.
    tol
        Target for ``max |pi^{d*}_lambda(q)|``.
    max_q_norm
        Basin radius: a solution with ``||q||_H`` above it is reported as
        not converged, since the decomposition is only meaningful near the
        soliton manifold.
    band_B
        ``B`` of the band ``-1 + 1/B <= nu/(1-|d|) <= B``; only reported.
    """
    if tol <= 0:
        raise ParameterError("tol must be positive")
    grid = v.grid
    if not np.isfinite(norm_H(v)):
        raise ParameterError("state must have finite H-norm")

    def F(params: SolitonParams) -> np.ndarray:
        return orthogonality_residuals(v, params)

    q_hat_norm = norm_H(v - kappa_star(init, grid))
    x = np.array([np.arctanh(init.d), init.scaled_nu])
    params = init
    f = F(params)
    history = [float(np.max(np.abs(f)))]
    converged = False
    message = ""
    it = 0
    for it in range(max_iter + 1):
        if np.max(np.abs(f)) <= tol:
            converged = True
            break
        if it == max_iter:
            message = "max_iter reached"
            break
        h = 1e-7
        J = np.empty((2, 2))
        bad = False
        for j in range(2):
            xp = x.copy()
            xp[j] += h
            pp = _to_params(xp)
            if pp is None:
                xp[j] -= 2 * h
                pp = _to_params(xp)
                if pp is None:
                    bad = True
                    break
                J[:, j] = (f - F(pp)) / h
            else:
                J[:, j] = (F(pp) - f) / h
        if bad or not np.all(np.isfinite(J)):
            message = "jacobian evaluation left the admissible region"
            break
        try:
            step = np.linalg.solve(J, -f)
        except np.linalg.LinAlgError:
            message = "singular jacobian"
            break
        fnorm = np.max(np.abs(f))
        accepted = False
        lam = 1.0
        for _ in range(11):
            xn = x + lam * step
            pn = _to_params(xn)
            if pn is not None:
                fn = F(pn)
                if np.all(np.isfinite(fn)) and np.max(np.abs(fn)) < fnorm:
                    accepted = True
                    break
            lam *= 0.5
        if not accepted:
            message = "step halving failed to reduce the residual"
            break
        x, params, f = xn, pn, fn
        history.append(float(np.max(np.abs(f))))

    q = v - kappa_star(params, grid)
    q_norm = norm_H(q)
    if converged and q_norm > max_q_norm:
        converged = False
        message = f"converged outside the modulation basin (||q||_H={q_norm:.3g})"
    band = params.scaled_nu
    band_ok = -1.0 + 1.0 / band_B <= band <= band_B
    if not converged:
        log.debug("modulation failed: %s", message)
    return ModulationResult(
        params=params,
        q=q,
        residuals=f,
        iterations=it,
        converged=converged,
        q_norm=q_norm,
        q_hat_norm=q_hat_norm,
        message=message,
        band_ok=bool(band_ok),
        history=history,
    )
