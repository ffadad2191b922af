"""Energy functionals, decay fits and audits along modulated trajectories.

The remainder ``q`` is measured with the quadratic form

    varphi(q, r) = int (q1' r1' (1-y^2) - psi q1 r1 + q2 r2) rho dy,
    psi = p kappa*_1^{p-1} - 2(p+1)/(p-1)^2,

and the Lyapunov-type functional

    h = varphi(q, q)/2 - int F(q1) rho dy + eta int q1 q2 rho dy,

where ``F`` is the antiderivative of the superquadratic part of the
nonlinearity around ``kappa*_1``.  Functions taking a trace only use its
array properties (``s``, ``d``, ``nu``, ``q_norm``, ``h``), so any object with
those attributes works.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .solitons import SolitonParams, kappa_star_values
from .spectral import StatePair, integrate, norm_H

__all__ = [
    "ShrinkingSetSpec",
    "EnergyReport",
    "DecayFit",
    "ShrinkingSetResult",
    "ParameterAudit",
    "potential_psi",
    "varphi_bilinear",
    "varphi",
    "F_closed_form",
    "nonlinear_R",
    "h_functional",
    "fit_exponential",
    "fit_decay",
    "envelope",
    "observed_envelope",
    "shrinking_set_check",
    "parameter_derivative_audit",
]


@dataclass(frozen=True)
class ShrinkingSetSpec:
    """Box ``|nu|, |d - d_hat0|, ||q||_H^2 <= A exp(-delta (s - s0) - s0)``."""

    A: float
    delta: float
    s0: float
    d_hat0: float

    def __post_init__(self):
        if not self.A > 0.0:
            raise ParameterError(f"A must be positive, got {self.A}")
        if not 0.0 < self.delta < 1.0:
            raise ParameterError(f"delta must lie in (0, 1), got {self.delta}")
        if not abs(self.d_hat0) < 1.0:
            raise ParameterError(f"d_hat0 must lie in (-1, 1), got {self.d_hat0}")

    def bound(self, s):
        return self.A * envelope(s, self.delta, self.s0)


@dataclass(frozen=True)
class EnergyReport:
    phi_qq: float
    R: float
    h: float
    eta: float
    ratio_H: float


def potential_psi(params: SolitonParams, y, p: float) -> np.ndarray:
    k1, _ = kappa_star_values(params.d, params.nu, y, p)
    return p * k1 ** (p - 1.0) - 2.0 * (p + 1.0) / (p - 1.0) ** 2


def varphi_bilinear(q: StatePair, r: StatePair, params: SolitonParams) -> float:
    """The symmetric form ``varphi(q, r)`` for the soliton ``kappa*(params)``."""
    g = q.grid
    psi = potential_psi(params, g.nodes, g.p)
    dq = g.diff @ q.first.values
    dr = g.diff @ r.first.values
    integrand = dq * dr * g.one_minus_y2 - psi * q.first.values * r.first.values + q.second.values * r.second.values
    return integrate(g, integrand)


def varphi(q: StatePair, params: SolitonParams) -> float:
    return varphi_bilinear(q, q, params)


def F_closed_form(a, k, p: float):
    """Antiderivative in ``a`` of ``|k+a|^{p-1}(k+a) - k^p - p k^{p-1} a``, zero at ``a=0``."""
    a = np.asarray(a, dtype=float)
    k = np.asarray(k, dtype=float)
    return (
        np.abs(k + a) ** (p + 1.0) / (p + 1.0)
        - k ** (p + 1.0) / (p + 1.0)
        - k**p * a
        - 0.5 * p * k ** (p - 1.0) * a**2
    )


def nonlinear_R(q1, params: SolitonParams) -> float:
    """``-int F(q1) rho dy`` with ``F`` in closed form."""
    g = q1.grid
    k1, _ = kappa_star_values(params.d, params.nu, g.nodes, g.p)
    return -integrate(g, F_closed_form(q1.values, k1, g.p))


def h_functional(q: StatePair, params: SolitonParams, eta: float) -> EnergyReport:
    g = q.grid
    phi = varphi(q, params)
    R = nonlinear_R(q.first, params)
    cross = integrate(g, q.first.values * q.second.values)
    h = 0.5 * phi + R + eta * cross
    nq2 = norm_H(q) ** 2
    ratio = phi / nq2 if nq2 > 0.0 else math.nan
    return EnergyReport(phi_qq=float(phi), R=float(R), h=float(h), eta=float(eta), ratio_H=float(ratio))


@dataclass(frozen=True)
class DecayFit:
    """``value ~ A_est exp(-delta_est (s - s0) - s0)`` fitted on ``n_used`` samples."""

    delta_est: float
    A_est: float
    r2: float
    n_used: int
    s_start: float


def fit_exponential(s, values, s0: float, min_samples: int = 10) -> DecayFit:
    """Least-squares line through ``log(values)`` against ``s - s0``.

    Nonpositive values are dropped; if none remain the fit is impossible.
    """
    s = np.asarray(s, dtype=float)
    v = np.asarray(values, dtype=float)
    if s.shape != v.shape or s.ndim != 1:
        raise ParameterError("s and values must be 1-d arrays of equal length")
    if len(s) < min_samples:
        raise ParameterError(f"need at least {min_samples} samples, got {len(s)}")
    keep = np.isfinite(v) & (v > 0.0)
    if not np.any(keep):
        raise ParameterError("no positive values to fit")
    if keep.sum() < 2:
        raise ParameterError("need at least two positive values to fit")
    x = s[keep] - s0
    z = np.log(v[keep])
    slope, intercept = np.polyfit(x, z, 1)
    resid = z - (slope * x + intercept)
    ss_res = float(np.sum(resid**2))
    ss_tot = float(np.sum((z - z.mean()) ** 2))
    # a perfectly flat series is fitted exactly by a zero slope
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 1e-300 else (1.0 if ss_res <= 1e-24 * len(z) else 0.0)
    return DecayFit(
        delta_est=float(-slope),
        A_est=float(math.exp(intercept + s0)),
        r2=float(r2),
        n_used=int(keep.sum()),
        s_start=float(s[keep][0]),
    )


def fit_decay(trace, field: str = "q_norm_sq", s_min: float | None = None, from_peak: bool = False) -> DecayFit:
    """Exponential decay fit of ``||q||_H^2`` or ``h`` along a trace.

    Parameters
    ----------
    field
        ``"q_norm_sq"`` or ``"h"``.
    s_min
        Drop samples before this time.
    from_peak
        Drop samples before the maximum of the series.  Runs started on the
        soliton manifold have ``q(s0) = 0`` and an initial growth phase; the
        decay rate only describes what follows the peak.
    """
    if field == "q_norm_sq":
        v = trace.q_norm**2
    elif field == "h":
        v = trace.h
    else:
        raise ParameterError(f"unknown field {field!r}")
    s = trace.s
    mask = np.ones(len(s), dtype=bool)
    if s_min is not None:
        mask &= s >= s_min
    if from_peak and len(v):
        mask &= np.arange(len(s)) >= int(np.nanargmax(np.where(mask, v, -np.inf)))
    return fit_exponential(s[mask], v[mask], trace.s0)


def envelope(s, delta: float, s0: float):
    return np.exp(-delta * (np.asarray(s, dtype=float) - s0) - s0)


def _normalized(trace, delta: float, s0: float, d_hat0: float) -> dict[str, np.ndarray]:
    env = envelope(trace.s, delta, s0)
    return {
        "nu": np.abs(trace.nu) / env,
        "d": np.abs(trace.d - d_hat0) / env,
        "q": trace.q_norm**2 / env,
    }


def observed_envelope(trace, delta: float, s0: float | None = None, d_hat0: float | None = None) -> float:
    """Largest of the three shrinking-set quantities divided by the envelope."""
    s0 = trace.s0 if s0 is None else s0
    d_hat0 = trace.d_hat0 if d_hat0 is None else d_hat0
    return float(max(np.max(a) for a in _normalized(trace, delta, s0, d_hat0).values()))


@dataclass(frozen=True)
class ShrinkingSetResult:
    inside: bool
    first_exit_s: float | None
    which_constraint: str | None


def shrinking_set_check(trace, spec: ShrinkingSetSpec) -> ShrinkingSetResult:
    """Check the three bounds sample by sample and report the first exit."""
    if len(trace.s) == 0:
        raise ParameterError("empty trace")
    norm = _normalized(trace, spec.delta, spec.s0, spec.d_hat0)
    for i, s in enumerate(trace.s):
        for name in ("nu", "d", "q"):
            if not norm[name][i] <= spec.A:
                return ShrinkingSetResult(False, float(s), name)
    return ShrinkingSetResult(True, None, None)


@dataclass(frozen=True)
class ParameterAudit:
    s: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    ratio: np.ndarray

    @property
    def max_ratio(self) -> float:
        return float(np.max(self.ratio))

    @property
    def argmax_s(self) -> float:
        return float(self.s[int(np.argmax(self.ratio))])


def parameter_derivative_audit(trace) -> ParameterAudit:
    """Empirical constant in the modulation-parameter dynamics bound.

    ``(|d'| + |nu' - nu|)/(1 - d*^2)`` against
    ``||q||^2 + ||q|| |nu|/(1 - d*^2) + e^{-s}``, with ``d'`` and ``nu'`` from
    central differences (one-sided at the ends).
    """
    s = trace.s
    if len(s) < 3:
        raise ParameterError("need at least 3 samples")
    d, nu, qn = trace.d, trace.nu, trace.q_norm
    dd = np.gradient(d, s)
    dnu = np.gradient(nu, s)
    ds2 = 1.0 - (d / (1.0 + nu)) ** 2
    lhs = (np.abs(dd) + np.abs(dnu - nu)) / ds2
    rhs = qn**2 + qn * np.abs(nu) / ds2 + np.exp(-s)
    return ParameterAudit(s=s, lhs=lhs, rhs=rhs, ratio=lhs / rhs)
