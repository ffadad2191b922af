"""The radial equation in physical variables ``(r, t)``.

    u_tt = u_rr + (N-1)/r u_r + |u|^{p-1} u

Second-order centred differences in ``r``, classical RK4 in ``t`` and
outgoing one-sided conditions at both ends of ``[r_min, r_max]``.  The
domain stays away from ``r = 0``.  Two departures from a plain fixed-step
scheme make blow-up fits possible:

* the step is ``min(dt, amp / max|u|^{(p-1)/2})``, which keeps the number
  of steps per e-fold of the amplitude bounded as ``u`` grows;
* points where ``|u|`` passes ``freeze_factor * M`` are frozen, so a point
  that blows up early does not stop the run before the monitored points
  reach the fitting band.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid
from scipy.interpolate import CubicSpline

from . import kernels
from .errors import ConfigError, DomainError, ParameterError
from .solitons import kappa0
from .spectral import Grid, StatePair

log = logging.getLogger(__name__)

__all__ = [
    "PhysicalConfig",
    "PhysicalHistory",
    "BlowupEstimate",
    "BlowupCurve",
    "ConeGrowth",
    "smooth_ramp",
    "cutoff_chi",
    "build_initial_data",
    "evolve_physical",
    "estimate_blowup_time",
    "blowup_curve",
    "to_selfsim",
    "cone_average",
    "cone_average_growth",
]


@dataclass(frozen=True)
class PhysicalConfig:
    """Cutoff initial data around ``(r0, T0)`` and the finite-difference grid.

    ``r_min``/``r_max`` default to ``r0 -/+ (T0 + 3 eps0)``.  ``M`` is the
    blow-up threshold; when ``None`` it is ``1e3`` times the initial sup.
    ``amp=None`` disables the amplitude limit on the step (fixed ``dt``).
    """

    p: float = 3.0
    N: int = 1
    r0: float = 2.0
    T0: float = 1.0
    eps0: float = 0.25
    d0: float = 0.0
    nu0: float = 0.0
    dr: float = 2e-3
    dt: float | None = None
    r_min: float | None = None
    r_max: float | None = None
    M: float | None = None
    amp: float | None = 0.05
    freeze_factor: float = 10.0
    t_max: float | None = None

    def __post_init__(self):
        if not self.p > 1.0:
            raise ConfigError(f"p must exceed 1, got {self.p}")
        if int(self.N) != self.N or self.N < 1:
            raise ConfigError(f"N must be an integer >= 1, got {self.N}")
        if not (self.T0 > 0.0 and self.eps0 > 0.0 and self.dr > 0.0):
            raise ConfigError("T0, eps0 and dr must be positive")
        if not abs(self.d0) < 1.0:
            raise ConfigError(f"|d0| must be below 1, got {self.d0}")
        if not 1.0 + self.nu0 - abs(self.d0) > 0.0:
            raise ConfigError("need 1 + nu0 > |d0|")
        if self.dt is not None and not 0.0 < self.dt <= 0.9 * self.dr * (1 + 1e-12):
            raise ConfigError(f"dt must lie in (0, 0.9 dr], got dt={self.dt}, dr={self.dr}")
        lo, hi = self.domain
        if not lo > 0.0:
            raise ConfigError(f"r_min must be positive, got {lo}")
        reach = self.T0 + 2.0 * self.eps0
        if lo > self.r0 - reach + 1e-12 or hi < self.r0 + reach - 1e-12:
            raise ConfigError("domain must contain the support of the cutoff")
        if self.M is not None and not self.M > 0.0:
            raise ConfigError("M must be positive")
        if self.amp is not None and not self.amp > 0.0:
            raise ConfigError("amp must be positive")
        if not self.freeze_factor > 1.0:
            raise ConfigError("freeze_factor must exceed 1")

    @property
    def alpha(self) -> float:
        return 2.0 / (self.p - 1.0)

    @property
    def domain(self) -> tuple[float, float]:
        lo = self.r_min if self.r_min is not None else self.r0 - self.T0 - 3.0 * self.eps0
        hi = self.r_max if self.r_max is not None else self.r0 + self.T0 + 3.0 * self.eps0
        return lo, hi

    @property
    def time_step(self) -> float:
        return self.dt if self.dt is not None else 0.9 * self.dr

    @property
    def r_grid(self) -> np.ndarray:
        lo, hi = self.domain
        n = int(math.floor((hi - lo) / self.dr + 1e-9)) + 1
        if n < 5:
            raise ConfigError("grid needs at least 5 points")
        return lo + self.dr * np.arange(n)

    def index_of(self, r: float) -> int:
        lo, _ = self.domain
        i = int(round((r - lo) / self.dr))
        if not 0 <= i < len(self.r_grid):
            raise DomainError(f"r={r} lies outside the grid")
        return i


def smooth_ramp(x):
    """C-infinity step ``f(x)/(f(x)+f(1-x))`` with ``f(x) = exp(-1/x)`` for ``x > 0``."""
    x = np.asarray(x, dtype=float)

    def f(z):
        pos = z > 0.0
        return np.where(pos, np.exp(-1.0 / np.where(pos, z, 1.0)), 0.0)

    a, b = f(x), f(1.0 - x)
    return a / (a + b)


def cutoff_chi(r, cfg: PhysicalConfig):
    """1 within ``T0 + eps0`` of ``r0``, 0 beyond ``T0 + 2 eps0``."""
    dist = np.abs(np.asarray(r, dtype=float) - cfg.r0) - (cfg.T0 + cfg.eps0)
    out = 1.0 - smooth_ramp(np.clip(dist / cfg.eps0, 0.0, 1.0))
    return float(out) if np.ndim(out) == 0 else out


def build_initial_data(cfg: PhysicalConfig, r=None) -> tuple[np.ndarray, np.ndarray]:
    """``(u0, u1) = chi * (u_hat, d_t u_hat / (1 + nu0))`` at ``t = 0``."""
    r = cfg.r_grid if r is None else np.asarray(r, dtype=float)
    chi = cutoff_chi(r, cfg)
    support = chi > 0.0
    den = (1.0 + cfg.nu0) * cfg.T0 + cfg.d0 * (r - cfg.r0)
    if np.any(den[support] < 1e-6):
        raise ConfigError("explicit profile is singular on the cutoff support; reduce eps0")
    safe = np.where(support, den, 1.0)
    uh = kappa0(cfg.p) * (1.0 - cfg.d0**2) ** (1.0 / (cfg.p - 1.0)) * safe ** (-cfg.alpha)
    u0 = np.where(support, chi * uh, 0.0)
    u1 = np.where(support, chi * cfg.alpha * uh / safe, 0.0)
    return u0, u1


@dataclass
class PhysicalHistory:
    """Monitor time series, exact-time snapshots and the stop status of a run."""

    r: np.ndarray
    monitor_r: np.ndarray
    monitor_idx: np.ndarray
    t: np.ndarray
    u_monitor: np.ndarray
    snapshots: dict = field(default_factory=dict, repr=False)
    M: float = math.inf
    stop_reason: str = ""
    scheme_failure: bool = False
    steps: int = 0

    @property
    def t_final(self) -> float:
        return float(self.t[-1])

    def snapshot(self, t: float, tol: float = 1e-12) -> tuple[np.ndarray, np.ndarray]:
        for key, val in self.snapshots.items():
            if abs(key - t) <= tol * max(1.0, abs(t)):
                return val
        raise DomainError(f"no snapshot stored at t={t}")


def evolve_physical(
    u0,
    u1,
    cfg: PhysicalConfig,
    snapshot_times=(),
    monitor_r=(),
    callback=None,
    backend: str | None = None,
) -> PhysicalHistory:
    """Integrate until the stop criterion, storing snapshots and monitor values.

    The run stops when every monitored point has reached ``M``.  Without
    monitors it stops once every snapshot is taken, or, if none were
    requested, when ``|u| >= M`` anywhere.  It also stops at ``t_max``
    (default ``2 T0``), when ``callback(t, u, v)`` returns true, or on
    non-finite values (``scheme_failure``).  Steps are shortened to
    land exactly on each requested snapshot time.
    """
    r = cfg.r_grid
    u = np.array(u0, dtype=float)
    v = np.array(u1, dtype=float)
    if u.shape != r.shape or v.shape != r.shape:
        raise ParameterError("initial data must live on cfg.r_grid")
    sup0 = float(np.max(np.abs(u)))
    M = cfg.M if cfg.M is not None else 1e3 * max(sup0, 1e-300)
    if sup0 > 0.0 and M < 10.0 * sup0:
        raise ConfigError(f"threshold M={M:g} must be far above the initial amplitude {sup0:g}")
    kb = kernels.get_backend(backend)
    inv_r = 1.0 / r
    idx = np.array([cfg.index_of(x) for x in monitor_r], dtype=int)
    snaps = sorted(float(t) for t in snapshot_times)
    t_max = cfg.t_max if cfg.t_max is not None else 2.0 * cfg.T0
    frozen = np.zeros(len(r), dtype=np.uint8)
    cap = cfg.freeze_factor * M
    q = 0.5 * (cfg.p - 1.0)

    hist = _HistoryBuilder(r, idx, M)
    t = 0.0
    hist.add(t, u)
    snap_i = 0
    while snap_i < len(snaps) and snaps[snap_i] <= 0.0:
        hist.snapshots[snaps[snap_i]] = (u.copy(), v.copy())
        snap_i += 1
    reason = "t_max reached"
    failure = False
    steps = 0
    while t < t_max - 1e-15:
        active = frozen == 0
        h = cfg.time_step
        if cfg.amp is not None and np.any(active):
            umax = float(np.max(np.abs(u[active])))
            if umax > 0.0:
                h = min(h, cfg.amp / umax**q)
        h = min(h, t_max - t)
        landing = snap_i < len(snaps) and t + h >= snaps[snap_i] - 1e-15
        if landing:
            h = snaps[snap_i] - t
        with np.errstate(over="ignore", invalid="ignore"):
            status = kb.wave_rk4_step(u, v, inv_r, cfg.dr, h, int(cfg.N), float(cfg.p), frozen)
        steps += 1
        t = snaps[snap_i] if landing else t + h
        if status != 0:
            failure = True
            reason = f"non-finite values at t={t:.6g}"
            hist.add(t, np.nan_to_num(u, nan=np.inf))
            break
        frozen |= (np.abs(u) >= cap).astype(np.uint8)
        hist.add(t, u)
        while snap_i < len(snaps) and snaps[snap_i] <= t + 1e-15:
            hist.snapshots[snaps[snap_i]] = (u.copy(), v.copy())
            snap_i += 1
        if callback is not None and callback(t, u, v):
            reason = "stopped by callback"
            break
        if len(idx):
            if np.all(np.abs(u[idx]) >= M):
                reason = "threshold reached at all monitor points"
                break
        elif snaps:
            if snap_i == len(snaps):
                reason = "all snapshots taken"
                break
        elif np.any(np.abs(u) >= M):
            reason = "threshold reached"
            break
    out = hist.build()
    out.stop_reason = reason
    out.scheme_failure = failure
    out.steps = steps
    return out


class _HistoryBuilder:
    def __init__(self, r, idx, M):
        self.r = r
        self.idx = idx
        self.M = M
        self.ts: list[float] = []
        self.us: list[np.ndarray] = []
        self.snapshots: dict = {}

    def add(self, t, u):
        self.ts.append(float(t))
        self.us.append(np.array(u[self.idx], dtype=float))

    def build(self) -> PhysicalHistory:
        return PhysicalHistory(
            r=self.r,
            monitor_r=self.r[self.idx],
            monitor_idx=self.idx,
            t=np.array(self.ts),
            u_monitor=np.array(self.us).reshape(len(self.ts), len(self.idx)),
            snapshots=self.snapshots,
            M=self.M,
        )


@dataclass(frozen=True)
class BlowupEstimate:
    T: float
    fit_quality: float
    n_used: int
    detected: bool


def estimate_blowup_time(t, u, M: float, p: float) -> BlowupEstimate:
    """Extrapolated blow-up time from ``u ~ c (T - t)^{-2/(p-1)}``.

    ``|u|^{-(p-1)/2}`` is linear in ``t`` for that model; the line is fitted
    over samples with ``M/10 <= |u| <= M`` and its zero is ``T``.
    ``fit_quality`` is the ``r^2`` of that line.
    """
    t = np.asarray(t, dtype=float)
    a = np.abs(np.asarray(u, dtype=float))
    band = np.isfinite(a) & (a >= M / 10.0) & (a <= M)
    if band.sum() < 3:
        return BlowupEstimate(math.nan, math.nan, int(band.sum()), False)
    x = t[band]
    z = a[band] ** (-(p - 1.0) / 2.0)
    slope, icpt = np.polyfit(x, z, 1)
    if not slope < 0.0:
        return BlowupEstimate(math.nan, math.nan, int(band.sum()), False)
    resid = z - (slope * x + icpt)
    ss_tot = float(np.sum((z - z.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0.0 else 1.0
    return BlowupEstimate(float(-icpt / slope), float(r2), int(band.sum()), True)


@dataclass(frozen=True)
class BlowupCurve:
    r: np.ndarray
    T: np.ndarray
    fit_quality: np.ndarray
    slope_at_r0: float
    T_r0: float
    noncharacteristic_ratio: float
    lipschitz_ok: bool

    @property
    def noncharacteristic(self) -> bool:
        return abs(self.slope_at_r0) < 1.0 and self.noncharacteristic_ratio < 1.0


def blowup_curve(
    cfg: PhysicalConfig,
    r_samples,
    tol: float = 1e-3,
    backend: str | None = None,
) -> BlowupCurve:
    """Blow-up times at ``r_samples`` (``r0`` is always added) and the slope at ``r0``.

    The slope is the central difference over the nearest sample on each side
    of ``r0``; ``noncharacteristic_ratio`` is ``max |T_j - T(r0)| / |r_j - r0|``.
    """
    r = cfg.r_grid
    samples = sorted({float(r[cfg.index_of(x)]) for x in list(r_samples) + [cfg.r0]})
    u0, u1 = build_initial_data(cfg)
    hist = evolve_physical(u0, u1, cfg, monitor_r=samples, backend=backend)
    if hist.scheme_failure:
        raise DomainError(f"physical run failed: {hist.stop_reason}")
    est = [estimate_blowup_time(hist.t, hist.u_monitor[:, j], hist.M, cfg.p) for j in range(len(samples))]
    rs = np.array(samples)
    Ts = np.array([e.T for e in est])
    fq = np.array([e.fit_quality for e in est])
    j0 = int(np.argmin(np.abs(rs - cfg.r0)))
    T_r0 = float(Ts[j0])
    if 0 < j0 < len(rs) - 1:
        slope = float((Ts[j0 + 1] - Ts[j0 - 1]) / (rs[j0 + 1] - rs[j0 - 1]))
    elif len(rs) > 1:
        k = 1 if j0 == 0 else j0 - 1
        slope = float((Ts[k] - Ts[j0]) / (rs[k] - rs[j0]))
    else:
        slope = math.nan
    others = np.arange(len(rs)) != j0
    ratio = float(np.max(np.abs(Ts[others] - T_r0) / np.abs(rs[others] - rs[j0]))) if others.any() else math.nan
    lip = bool(np.all(np.abs(np.diff(Ts)) <= np.abs(np.diff(rs)) + tol))
    return BlowupCurve(rs, Ts, fq, slope, T_r0, ratio, lip)


def to_selfsim(history: PhysicalHistory, r0: float, T0: float, s: float, grid: Grid, p: float | None = None) -> StatePair:
    """Similarity-variable state ``(w, d_s w)`` at time ``s`` on ``grid``.

    ``w(y, s) = tau^{2/(p-1)} u(r0 + y tau, T0 - tau)`` with ``tau = e^{-s}``,
    and ``d_s w = -2/(p-1) w + tau^{(p+1)/(p-1)} (u_t - y u_r)``.  Values come
    from cubic splines through the snapshot taken at ``t = T0 - tau``.
    """
    p = grid.p if p is None else p
    tau = math.exp(-s)
    if not tau <= T0 * (1.0 + 1e-14):
        raise DomainError(f"e^(-s)={tau} must not exceed T0={T0}")
    u, v = history.snapshot(T0 - tau)
    r = history.r
    if r0 - tau < r[0] or r0 + tau > r[-1]:
        raise DomainError("backward cone leaves the r-grid")
    a = 2.0 / (p - 1.0)
    y = grid.nodes
    rr = r0 + y * tau
    su = CubicSpline(r, u)
    sv = CubicSpline(r, v)
    w1 = tau**a * su(rr)
    w2 = -a * w1 + tau ** (a + 1.0) * (sv(rr) - y * su(rr, 1))
    return grid.pair(w1, w2)


def cone_average(history: PhysicalHistory, t: float, r0: float, T0: float) -> float:
    """``(1/(T0-t)) int_{|r-r0|<T0-t} u^2 dr`` by the trapezoid rule."""
    tau = T0 - t
    if not tau > 0.0:
        raise DomainError("cone average needs t < T0")
    u, _ = history.snapshot(t)
    r = history.r
    lo, hi = r0 - tau, r0 + tau
    if lo < r[0] or hi > r[-1]:
        raise DomainError("backward cone leaves the r-grid")
    inside = (r > lo) & (r < hi)
    u2 = u * u
    rs = np.concatenate([[lo], r[inside], [hi]])
    vals = np.concatenate([[np.interp(lo, r, u2)], u2[inside], [np.interp(hi, r, u2)]])
    return float(trapezoid(vals, rs) / tau)


@dataclass(frozen=True)
class ConeGrowth:
    exponent: float
    r2: float
    diverging: bool


def cone_average_growth(history: PhysicalHistory, times, r0: float, T0: float) -> ConeGrowth:
    """Log-log fit of the cone average against ``T0 - t``.

    ``exponent`` is the growth rate ``-d log(avg) / d log(T0 - t)``;
    ``diverging`` is set when it is positive and the average increases
    monotonically over the sampled times.
    """
    times = np.sort(np.asarray(times, dtype=float))
    if len(times) < 3:
        raise ParameterError("need at least 3 times")
    avg = np.array([cone_average(history, t, r0, T0) for t in times])
    if np.any(avg <= 0.0):
        return ConeGrowth(math.nan, math.nan, False)
    x = np.log(T0 - times)
    z = np.log(avg)
    slope, icpt = np.polyfit(x, z, 1)
    resid = z - (slope * x + icpt)
    ss_tot = float(np.sum((z - z.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0.0 else 1.0
    diverging = bool(-slope > 0.0 and np.all(np.diff(avg) > 0.0))
    return ConeGrowth(float(-slope), float(r2), diverging)
