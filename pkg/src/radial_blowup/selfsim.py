"""Evolution in similarity variables with periodic modulation.

First-order form of the equation for ``w(y, s)``::

    d/ds w1 = w2
    d/ds w2 = L w1 - 2(p+1)/(p-1)^2 w1 + |w1|^{p-1} w1 - (p+3)/(p-1) w2
              - 2 y d/dy w2 + e^{-s} (N-1)/(r0 + y e^{-s}) d/dy w1

The spatial operators act on nodal values through the grid's dense
matrices, and time stepping is classical RK4.  Long runs go through the
kernel backend (compiled if available); ``rhs`` and ``step`` are the plain
NumPy reference versions.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .diagnostics import h_functional, varphi
from .errors import ConfigError, ParameterError, SchemeBlowupError
from .modulation import modulate
from .solitons import SolitonParams, kappa_star
from .spectral import Field, Grid, StatePair, build_grid

log = logging.getLogger(__name__)

__all__ = [
    "SelfSimConfig",
    "TraceRecord",
    "Trace",
    "effective_ds",
    "rhs",
    "step",
    "evolve",
    "spectral_filter_matrix",
    "ShootingResult",
    "shoot_initial_parameters",
]


@dataclass(frozen=True)
class SelfSimConfig:
    """Parameters of one similarity-variable run.

    ``s0`` must exceed ``-log r0`` so that ``r0 + y e^{-s} > 0`` on the
    whole interval; ``T0 = e^{-s0}`` is the corresponding blow-up time.
    """

    p: float = 3.0
    N: int = 3
    r0: float = 1.0
    s0: float = 3.0
    s_end: float = 8.0
    ds: float = 1e-3
    n: int = 48
    sample_every: int = 100
    d_hat0: float | None = None
    eta: float | None = None
    spectral_filter: bool = False
    mod_tol: float = 1e-10

    def __post_init__(self):
        if not self.p > 1.0:
            raise ConfigError(f"p must exceed 1, got {self.p}")
        if int(self.N) != self.N or self.N < 1:
            raise ConfigError(f"N must be an integer >= 1, got {self.N}")
        if not self.r0 > 0.0:
            raise ConfigError(f"r0 must be positive, got {self.r0}")
        if not self.s0 > -math.log(self.r0):
            raise ConfigError(f"s0={self.s0} must exceed -log(r0)={-math.log(self.r0):.6g}")
        if not self.ds > 0.0:
            raise ConfigError("ds must be positive")
        if not self.s_end > self.s0:
            raise ConfigError("s_end must exceed s0")
        if int(self.n) != self.n or self.n < 8:
            raise ConfigError("n must be an integer >= 8")
        if int(self.sample_every) != self.sample_every or self.sample_every < 1:
            raise ConfigError("sample_every must be a positive integer")

    @property
    def T0(self) -> float:
        return math.exp(-self.s0)

    @property
    def eta_value(self) -> float:
        return self.eta if self.eta is not None else 0.1 / (self.p - 1.0)

    def grid(self) -> Grid:
        return build_grid(self.n, self.p)


def effective_ds(cfg: SelfSimConfig) -> tuple[float, int]:
    """Step size ``min(ds, 0.5/n^2)`` shrunk to divide ``[s0, s_end]`` evenly."""
    cap = min(cfg.ds, 0.5 / cfg.n**2)
    nsteps = max(1, math.ceil((cfg.s_end - cfg.s0) / cap - 1e-9))
    return (cfg.s_end - cfg.s0) / nsteps, nsteps


@dataclass(frozen=True)
class TraceRecord:
    s: float
    d: float
    nu: float
    q_norm_H: float
    phi_qq: float
    h: float
    orth0: float
    orth1: float


@dataclass
class Trace:
    """Samples of the modulated trajectory ``(d(s), nu(s), q(s))``."""

    records: list[TraceRecord] = field(default_factory=list)
    s0: float = 0.0
    d_hat0: float = 0.0
    failure: str | None = None
    s_bar: float | None = None
    s_bar_constraint: str | None = None
    final_state: StatePair | None = field(default=None, repr=False)
    states: dict = field(default_factory=dict, repr=False)

    def __len__(self) -> int:
        return len(self.records)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    @property
    def s(self) -> np.ndarray:
        return self.column("s")

    @property
    def d(self) -> np.ndarray:
        return self.column("d")

    @property
    def nu(self) -> np.ndarray:
        return self.column("nu")

    @property
    def q_norm(self) -> np.ndarray:
        return self.column("q_norm_H")

    @property
    def phi_qq(self) -> np.ndarray:
        return self.column("phi_qq")

    @property
    def h(self) -> np.ndarray:
        return self.column("h")

    @property
    def orth(self) -> np.ndarray:
        return np.column_stack([self.column("orth0"), self.column("orth1")]) if self.records else np.zeros((0, 2))

    @property
    def ok(self) -> bool:
        return self.failure is None


def rhs(state: StatePair, s: float, cfg: SelfSimConfig) -> StatePair:
    g = state.grid
    p = g.p
    y = g.nodes
    w1 = state.first.values
    w2 = state.second.values
    out2 = (
        g.lmat @ w1
        - 2.0 * (p + 1.0) / (p - 1.0) ** 2 * w1
        + np.abs(w1) ** (p - 1.0) * w1
        - (p + 3.0) / (p - 1.0) * w2
        - 2.0 * y * (g.diff @ w2)
    )
    if cfg.N != 1:
        es = math.exp(-s)
        out2 = out2 + es * (cfg.N - 1) / (cfg.r0 + y * es) * (g.diff @ w1)
    return StatePair(Field(w2, g), Field(out2, g))


def step(state: StatePair, s: float, ds: float, cfg: SelfSimConfig, rhs_fn=None) -> StatePair:
    """One classical RK4 step; raises :class:`SchemeBlowupError` on non-finite output."""
    f = rhs_fn or rhs
    with np.errstate(over="ignore", invalid="ignore"):
        try:
            k1 = f(state, s, cfg)
            k2 = f(state + k1 * (ds / 2), s + ds / 2, cfg)
            k3 = f(state + k2 * (ds / 2), s + ds / 2, cfg)
            k4 = f(state + k3 * ds, s + ds, cfg)
            return state + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (ds / 6.0)
        except ParameterError as exc:
            # Field construction rejects non-finite values
            raise SchemeBlowupError(f"non-finite state after step at s={s:.6g}") from exc


def spectral_filter_matrix(grid: Grid, keep: float = 2.0 / 3.0) -> np.ndarray:
    """Nodal operator zeroing the top third of the Jacobi modal coefficients."""
    from scipy.special import eval_jacobi

    a = grid.alpha
    V = np.column_stack([eval_jacobi(k, a, a, grid.nodes) for k in range(grid.n)])
    mask = (np.arange(grid.n) < int(math.ceil(keep * grid.n))).astype(float)
    return V @ np.diag(mask) @ np.linalg.inv(V)


def _record(state: StatePair, s: float, res, cfg: SelfSimConfig) -> TraceRecord:
    params = res.params
    energy = h_functional(res.q, params, cfg.eta_value)
    return TraceRecord(
        s=float(s),
        d=params.d,
        nu=params.nu,
        q_norm_H=res.q_norm,
        phi_qq=energy.phi_qq,
        h=energy.h,
        orth0=float(res.residuals[0]),
        orth1=float(res.residuals[1]),
    )


def evolve(
    init: StatePair,
    cfg: SelfSimConfig,
    init_params: SolitonParams | None = None,
    backend: str | None = None,
    keep_states=(),
    modulate_samples: bool = True,
) -> Trace:
    """Integrate from ``s0`` to ``s_end`` and modulate every ``sample_every`` steps.

    Parameters
    ----------
    init
        Initial ``(w, d_s w)`` on the config's grid.
    init_params
        Warm start for the first modulation; defaults to ``(d_hat0, 0)``.
    keep_states
        Times whose nearest sampled states are kept in ``trace.states``,
        keyed by the sample's ``s``.
    modulate_samples
        When false only the final state is modulated (used by shooting).
    """
    g = cfg.grid()
    if init.grid.n != g.n or init.grid.p != g.p:
        raise ParameterError("initial state is not on the configured grid")
    kb = kernels.get_backend(backend)
    ds, nsteps = effective_ds(cfg)
    d_hat0 = cfg.d_hat0 if cfg.d_hat0 is not None else (init_params.d if init_params else 0.0)
    params = init_params or SolitonParams(d_hat0, 0.0)
    filt = spectral_filter_matrix(g) if cfg.spectral_filter else None

    trace = Trace(s0=cfg.s0, d_hat0=d_hat0)
    q_cap = cfg.s0 ** -0.5 if cfg.s0 > 0 else math.inf
    nu_cap = cfg.s0 ** -0.25 if cfg.s0 > 0 else math.inf
    half_gap = 0.5 * cfg.sample_every * ds

    w1 = np.array(init.first.values, dtype=float)
    w2 = np.array(init.second.values, dtype=float)
    L = np.ascontiguousarray(g.lmat)
    D = np.ascontiguousarray(g.diff)
    y = np.ascontiguousarray(g.nodes)

    def sample(k: int) -> bool:
        nonlocal params
        s = cfg.s0 + k * ds
        state = g.pair(w1.copy(), w2.copy())
        if any(abs(s - t) <= half_gap for t in keep_states):
            trace.states[float(s)] = state
        res = modulate(state, params, tol=cfg.mod_tol)
        if not res.converged and cfg.d_hat0 is not None:
            res = modulate(state, SolitonParams(cfg.d_hat0, 0.0), tol=cfg.mod_tol)
        if not res.converged:
            trace.failure = f"modulation failed at s={s:.6g}: {res.message}"
            return False
        params = res.params
        rec = _record(state, s, res, cfg)
        trace.records.append(rec)
        if trace.s_bar is None:
            if rec.q_norm_H > q_cap:
                trace.s_bar, trace.s_bar_constraint = s, "q_norm"
            elif abs(rec.nu) / (1.0 - abs(rec.d)) > nu_cap:
                trace.s_bar, trace.s_bar_constraint = s, "nu"
        return True

    if modulate_samples and not sample(0):
        return trace
    k = 0
    while k < nsteps:
        m = 1 if filt is not None else min(cfg.sample_every - k % cfg.sample_every, nsteps - k)
        with np.errstate(over="ignore", invalid="ignore"):
            status = kb.selfsim_advance(
                w1, w2, L, D, y, float(cfg.p), int(cfg.N), float(cfg.r0), cfg.s0 + k * ds, ds, int(m)
            )
        if filt is not None:
            w1[:] = filt @ w1
            w2[:] = filt @ w2
        k += m
        if status != 0:
            trace.failure = f"scheme blow-up before s={cfg.s0 + k * ds:.6g}"
            return trace
        at_sample = k % cfg.sample_every == 0 or k == nsteps
        if at_sample and (modulate_samples or k == nsteps) and not sample(k):
            return trace
    trace.final_state = g.pair(w1, w2)
    return trace


@dataclass
class ShootingResult:
    d0: float
    nu0: float
    iterations: int
    converged: bool
    final_mismatch: np.ndarray


def shoot_initial_parameters(
    cfg: SelfSimConfig,
    d_hat0: float,
    tol: float = 1e-10,
    max_iter: int = 8,
    backend: str | None = None,
) -> ShootingResult:
    """Find ``(d0, nu0)`` so the modulated run ends at ``d = d_hat0``, ``nu = 0``.

    ``nu`` follows the unstable direction of the linearised flow and ``d`` the
    neutral one, so without this choice a finite-horizon run leaves any
    shrinking neighbourhood of ``kappa(d_hat0)``.  Damped Newton with a
    finite-difference Jacobian on the end-point map; each evaluation is one
    full run.  If the direct solve fails, the horizon is extended one unit of
    ``s`` at a time, each solve starting from the previous solution.
    """
    g = cfg.grid()
    target = np.array([d_hat0, 0.0])

    def endpoint(x, s_end):
        if not SolitonParams.is_admissible(float(x[0]), float(x[1])):
            return None
        params = SolitonParams(float(x[0]), float(x[1]))
        run_cfg = replace(cfg, d_hat0=None, s_end=s_end)
        tr = evolve(kappa_star(params, g), run_cfg, init_params=params, backend=backend, modulate_samples=False)
        if not tr.ok:
            return None
        last = tr.records[-1]
        return np.array([last.d, last.nu]) - target

    def solve(x, s_end):
        f = endpoint(x, s_end)
        if f is None:
            return None
        growth = math.exp(s_end - cfg.s0)
        it = 0
        while np.max(np.abs(f)) > tol and it < max_iter:
            it += 1
            J = np.empty((2, 2))
            for j, h in enumerate((1e-5, 1e-5 / growth)):
                xp = x.copy()
                xp[j] += h
                fp = endpoint(xp, s_end)
                if fp is None:
                    return None
                J[:, j] = (fp - f) / h
            step_ = -np.linalg.solve(J, f)
            lam = 1.0
            for _ in range(12):
                fn = endpoint(x + lam * step_, s_end)
                if fn is not None and np.max(np.abs(fn)) < np.max(np.abs(f)):
                    break
                lam *= 0.5
            else:
                return x, f, it, False
            x, f = x + lam * step_, fn
            log.debug("shooting to s=%g, iteration %d: x=%s mismatch=%s", s_end, it, x, f)
        return x, f, it, bool(np.max(np.abs(f)) <= tol)

    x0 = np.array([d_hat0, 0.0])
    out = solve(x0.copy(), cfg.s_end)
    if out is None or not out[3]:
        x, total = x0.copy(), 0
        horizons = list(np.arange(cfg.s0 + 1.0, cfg.s_end, 1.0)) + [cfg.s_end]
        for s_end in horizons:
            out = solve(x, float(s_end))
            if out is None:
                raise SchemeBlowupError(f"shooting failed on the horizon s_end={s_end:.6g}")
            x, total = out[0], total + out[2]
        out = (out[0], out[1], total, out[3])
    x, f, it, ok = out
    return ShootingResult(d0=float(x[0]), nu0=float(x[1]), iterations=it, converged=ok, final_mismatch=f)
