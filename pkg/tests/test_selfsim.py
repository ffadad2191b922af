import math

import numpy as np
import pytest

from radial_blowup import kernels
from radial_blowup.errors import ConfigError, SchemeBlowupError
from radial_blowup.selfsim import (
    SelfSimConfig,
    effective_ds,
    evolve,
    rhs,
    shoot_initial_parameters,
    spectral_filter_matrix,
    step,
)
from radial_blowup.solitons import SolitonParams, kappa, kappa_star
from radial_blowup.spectral import StatePair, build_grid, norm_H, norm_H0


def cfg_for(**kw):
    base = dict(p=3.0, N=1, r0=1.0, s0=3.0, s_end=4.0, ds=1e-3, n=48, sample_every=200)
    base.update(kw)
    return SelfSimConfig(**base)


@pytest.mark.parametrize("d", [0.0, 0.3, -0.6])
def test_rhs_stationary_soliton(d):
    cfg = cfg_for()
    g = cfg.grid()
    out = rhs(g.pair(kappa(d, g).values, np.zeros(g.n)), 3.0, cfg)
    assert np.max(np.abs(out.first.values)) == 0.0
    assert norm_H0(out.second) <= 1e-8


@pytest.mark.parametrize("d", [0.0, 0.3, -0.5])
def test_rhs_radial_term_cancellation(d):
    cfg = cfg_for(N=3)
    g = cfg.grid()
    k = kappa(d, g).values
    out = rhs(g.pair(k, np.zeros(g.n)), cfg.s0, cfg).second.values
    es = math.exp(-cfg.s0)
    expected = es * 2.0 / (cfg.r0 + g.nodes * es) * (g.diff @ k)
    assert np.max(np.abs(out - expected)) <= 1e-8


def test_rhs_and_step_preserve_zero():
    cfg = cfg_for(N=3)
    z = StatePair.zeros(cfg.grid())
    out = rhs(z, 3.5, cfg)
    assert not np.any(out.first.values) and not np.any(out.second.values)
    nxt = step(z, 3.5, 1e-4, cfg)
    assert not np.any(nxt.first.values) and not np.any(nxt.second.values)


def _linear_rhs(state, s, cfg):
    g = state.grid
    p = g.p
    w1, w2 = state.first.values, state.second.values
    out = g.lmat @ w1 - 2 * (p + 1) / (p - 1) ** 2 * w1 - (p + 3) / (p - 1) * w2 - 2 * g.nodes * (g.diff @ w2)
    return g.pair(w2, out)


def test_linear_stability_at_capped_step(rng):
    n = 24
    cfg = cfg_for(n=n)
    g = cfg.grid()
    y = g.nodes
    state = g.pair(np.polyval(rng.standard_normal(6), y), np.polyval(rng.standard_normal(6), y))
    ds = 0.5 / n**2
    energies = [norm_H(state)]
    for k in range(400):
        state = step(state, 3.0 + k * ds, ds, cfg, rhs_fn=_linear_rhs)
        energies.append(norm_H(state))
    e = np.array(energies)
    assert np.all(np.isfinite(e))
    jumps = np.maximum(e[1:] / e[:-1], e[:-1] / e[1:])
    assert jumps.max() < 10.0


def test_step_flags_scheme_blowup():
    cfg = cfg_for(n=16)
    g = cfg.grid()
    huge = g.pair(np.full(16, 1e120), np.zeros(16))
    with pytest.raises(SchemeBlowupError):
        step(huge, 3.0, 1e-2, cfg)


def test_rk4_convergence_order():
    cfg = cfg_for(N=3, n=12)
    g = cfg.grid()
    y = g.nodes
    init = kappa_star(SolitonParams(0.3, 0.02), g) + g.pair(0.2 * np.cos(2 * y), 0.3 * y**3)

    def run(ds, length=0.5):
        st = init
        for k in range(int(round(length / ds))):
            st = step(st, cfg.s0 + k * ds, ds, cfg)
        return st

    ref = run(1.25e-4)
    errs = [norm_H(run(h) - ref) for h in (4e-3, 2e-3)]
    assert 13.0 < errs[0] / errs[1] < 19.0


def test_config_validation():
    with pytest.raises(ConfigError):
        SelfSimConfig(r0=1.0, s0=-0.5)
    with pytest.raises(ConfigError):
        SelfSimConfig(r0=0.5, s0=0.5)
    with pytest.raises(ConfigError):
        SelfSimConfig(ds=0.0)
    with pytest.raises(ConfigError):
        SelfSimConfig(s0=3.0, s_end=3.0)
    with pytest.raises(ConfigError):
        SelfSimConfig(n=6)


def test_effective_step():
    ds, nsteps = effective_ds(cfg_for(n=48, ds=1.0, s_end=4.0))
    assert ds <= 0.5 / 48**2
    assert abs(ds * nsteps - 1.0) < 1e-12


@pytest.mark.parametrize("d", [0.0, 0.3, -0.6])
def test_stationary_orbit(d):
    cfg = cfg_for(N=1, d_hat0=d, s_end=5.0)
    g = cfg.grid()
    tr = evolve(g.pair(kappa(d, g).values, np.zeros(g.n)), cfg)
    assert tr.ok and len(tr) > 5
    assert np.max(tr.q_norm) <= 1e-6
    assert np.all(np.diff(tr.s) > 0)
    assert np.all(np.isfinite(np.column_stack([tr.s, tr.d, tr.nu, tr.q_norm, tr.h])))


def test_generalized_soliton_orbit():
    mu_e = 0.02
    cfg = cfg_for(N=1, s_end=4.0, sample_every=100)
    g = cfg.grid()
    P = SolitonParams(0.3, mu_e)
    tr = evolve(kappa_star(P, g), cfg, init_params=P)
    assert tr.ok
    expected = mu_e * np.exp(tr.s - cfg.s0)
    assert np.max(np.abs(tr.nu / expected - 1.0)) <= 1e-3
    assert np.max(np.abs(tr.d - 0.3)) <= 1e-6


def test_backends_agree():
    if kernels.compiled_backend is None:
        pytest.skip("compiled kernels not built")
    cfg = cfg_for(N=3, s_end=3.5, sample_every=500)
    g = cfg.grid()
    P = SolitonParams(0.3, 0.0)
    a = evolve(kappa_star(P, g), cfg, init_params=P, backend="python")
    b = evolve(kappa_star(P, g), cfg, init_params=P, backend="compiled")
    assert np.max(np.abs(a.final_state.first.values - b.final_state.first.values)) < 1e-12
    assert np.max(np.abs(a.q_norm - b.q_norm)) < 1e-12


def test_n1_matches_specialised_path():
    # an N=1 run through the general kernel against plain RK4 steps without the radial term
    cfg = cfg_for(N=1, n=16, s_end=3.2, ds=1e-3, sample_every=10**6)
    g = cfg.grid()
    init = kappa_star(SolitonParams(0.2, 0.01), g)
    tr = evolve(init, cfg, init_params=SolitonParams(0.2, 0.01), modulate_samples=False, backend="python")
    ds, nsteps = effective_ds(cfg)
    st = init
    for k in range(nsteps):
        st = step(st, cfg.s0 + k * ds, ds, cfg)
    assert np.max(np.abs(tr.final_state.first.values - st.first.values)) <= 1e-12
    assert np.max(np.abs(tr.final_state.second.values - st.second.values)) <= 1e-12


def test_spectral_filter():
    g = build_grid(24, 3.0)
    F = spectral_filter_matrix(g)
    y = g.nodes
    low = y**5 - 0.3 * y**2
    assert np.max(np.abs(F @ low - low)) < 1e-10
    assert np.max(np.abs(F @ (F @ low) - F @ low)) < 1e-10
    cfg = cfg_for(N=3, n=24, s_end=3.3, spectral_filter=True, sample_every=200)
    P = SolitonParams(0.3, 0.0)
    tr = evolve(kappa_star(P, cfg.grid()), cfg, init_params=P)
    assert tr.ok


def test_modulation_failure_truncates_trace():
    cfg = cfg_for(N=1, s_end=3.2, d_hat0=0.3)
    g = cfg.grid()
    tr = evolve(kappa_star(SolitonParams(0.3, 0.0), g) * 10.0, cfg, init_params=SolitonParams(0.3, 0.0))
    assert not tr.ok
    assert "modulation" in tr.failure
    assert len(tr) == 0


def test_s_bar_flags_first_violation():
    # unshot N=3 data drift along the unstable direction
    cfg = SelfSimConfig(p=3.0, N=3, r0=1.0, s0=3.0, s_end=8.5, n=32, sample_every=200, d_hat0=0.3)
    P = SolitonParams(0.3, 0.0)
    tr = evolve(kappa_star(P, cfg.grid()), cfg, init_params=P)
    assert tr.ok and tr.s_bar is not None and tr.s_bar_constraint == "nu"
    i = int(np.searchsorted(tr.s, tr.s_bar))
    before = np.abs(tr.nu[:i]) / (1 - np.abs(tr.d[:i]))
    assert np.all(before <= cfg.s0**-0.25) and np.all(tr.q_norm[:i] <= cfg.s0**-0.5)


@pytest.mark.slow
def test_main_scenario_decays():
    cfg = SelfSimConfig(p=3.0, N=3, r0=1.0, s0=3.0, s_end=8.0, n=48, sample_every=100, d_hat0=0.3)
    sh = shoot_initial_parameters(cfg, 0.3)
    assert sh.converged
    P = SolitonParams(sh.d0, sh.nu0)
    tr = evolve(kappa_star(P, cfg.grid()), cfg, init_params=P)
    assert tr.ok and tr.s_bar is None
    assert abs(tr.d[-1] - 0.3) < 1e-9 and abs(tr.nu[-1]) < 1e-9
    assert tr.q_norm[-1] < tr.q_norm.max() * 5e-2
