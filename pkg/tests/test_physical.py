import math

import numpy as np
import pytest

from radial_blowup import kernels
from radial_blowup.errors import ConfigError, DomainError
from radial_blowup.physical import (
    PhysicalConfig,
    blowup_curve,
    build_initial_data,
    cone_average,
    cone_average_growth,
    cutoff_chi,
    estimate_blowup_time,
    evolve_physical,
    to_selfsim,
)
from radial_blowup.solitons import SolitonParams, kappa0, kappa_star, u_hat
from radial_blowup.spectral import build_grid


def test_cutoff_values():
    cfg = PhysicalConfig(r0=2.0, T0=1.0, eps0=0.25)
    assert cutoff_chi(2.0, cfg) == 1.0
    assert cutoff_chi(2.0 + 1.25, cfg) == 1.0
    assert cutoff_chi(2.0 - 1.5, cfg) == 0.0
    assert cutoff_chi(2.0 + 1.6, cfg) == 0.0
    assert abs(cutoff_chi(2.0 + 1.375, cfg) - 0.5) < 1e-14
    r = np.linspace(0.2, 3.8, 401)
    chi = cutoff_chi(r, cfg)
    assert np.all((chi >= 0.0) & (chi <= 1.0))


@pytest.mark.parametrize("d,nu", [(0.0, 0.0), (0.3, 0.02), (-0.3, -0.01)])
def test_initial_data_on_plateau(d, nu):
    cfg = PhysicalConfig(r0=2.0, T0=1.0, eps0=0.25, d0=d, nu0=nu)
    r = cfg.r_grid
    u0, u1 = build_initial_data(cfg)
    plateau = np.abs(r - cfg.r0) <= cfg.T0 + cfg.eps0
    exact = u_hat(d, nu, cfg.r0, cfg.T0, r[plateau], 0.0, p=3.0)
    assert np.max(np.abs(u0[plateau] - exact) / exact) < 1e-12
    h = 1e-6
    ut = (u_hat(d, nu, cfg.r0, cfg.T0, r[plateau], h, p=3.0) - u_hat(d, nu, cfg.r0, cfg.T0, r[plateau], -h, p=3.0)) / (2 * h)
    assert np.max(np.abs(u1[plateau] * (1.0 + nu) - ut) / ut) < 1e-7
    assert np.all(u0[np.abs(r - cfg.r0) >= cfg.T0 + 2 * cfg.eps0] == 0.0)


def test_constant_case_and_singular_profile():
    cfg = PhysicalConfig(r0=2.0, T0=1.0, eps0=0.25)
    u0, _ = build_initial_data(cfg)
    plateau = np.abs(cfg.r_grid - cfg.r0) <= 1.25
    assert np.allclose(u0[plateau], kappa0(3.0), rtol=0, atol=1e-14)
    with pytest.raises(ConfigError):
        build_initial_data(PhysicalConfig(r0=3.0, T0=1.0, eps0=0.6, d0=0.9))


def test_config_validation():
    with pytest.raises(ConfigError):
        PhysicalConfig(dt=1e-2, dr=1e-3)
    with pytest.raises(ConfigError):
        PhysicalConfig(r0=1.0, T0=1.0)
    with pytest.raises(ConfigError):
        PhysicalConfig(d0=1.0)
    with pytest.raises(DomainError):
        PhysicalConfig().index_of(100.0)


def test_zero_data_stays_zero():
    cfg = PhysicalConfig(N=3, M=1.0, t_max=0.2)
    z = np.zeros(len(cfg.r_grid))
    hist = evolve_physical(z, z, cfg, snapshot_times=(0.1,), monitor_r=(2.0,))
    u, v = hist.snapshot(0.1)
    assert np.all(u == 0.0) and np.all(v == 0.0)
    assert hist.stop_reason == "t_max reached"
    with pytest.raises(DomainError):
        hist.snapshot(0.05)


def test_threshold_must_exceed_initial_amplitude():
    cfg = PhysicalConfig(M=1.0)
    u0, u1 = build_initial_data(cfg)
    with pytest.raises(ConfigError):
        evolve_physical(u0, u1, cfg)


def test_plateau_matches_ode_solution():
    cfg = PhysicalConfig(r0=2.0, T0=1.0, eps0=0.25, dr=2e-3)
    u0, u1 = build_initial_data(cfg)
    hist = evolve_physical(u0, u1, cfg, snapshot_times=(0.5, 0.9))
    for t in (0.5, 0.9):
        u, _ = hist.snapshot(t)
        exact = kappa0(3.0) / (1.0 - t)
        i = cfg.index_of(2.0)
        assert abs(u[i] / exact - 1.0) < 1e-6
        inner = np.abs(cfg.r_grid - 2.0) < 1.25 - t - 0.05
        assert np.max(np.abs(u[inner] / exact - 1.0)) < 1e-6
    assert list(sorted(hist.snapshots)) == [0.5, 0.9]


def test_finite_speed_of_propagation():
    cfg = PhysicalConfig(N=3, r0=2.0, T0=1.0, eps0=0.25, t_max=0.3)
    r = cfg.r_grid
    u0, u1 = build_initial_data(cfg)
    bump = 1e-2 * np.exp(-(((r - 2.8) / 0.02) ** 2)) * (np.abs(r - 2.8) < 0.1)
    a = evolve_physical(u0, u1, cfg, snapshot_times=(0.3,), monitor_r=(2.0,))
    b = evolve_physical(u0 + bump, u1, cfg, snapshot_times=(0.3,), monitor_r=(2.0,))
    diff = np.abs(a.snapshot(0.3)[0] - b.snapshot(0.3)[0])
    far = np.abs(r - 2.8) > 0.1 + 0.3 + 0.05
    near = np.abs(r - 2.8) < 0.1 + 0.3
    assert np.max(diff[far]) < 1e-10
    assert np.max(diff[near]) > 1e-5


def test_estimate_blowup_time_synthetic():
    p, T, c = 3.0, 0.8, math.sqrt(2.0)
    t = np.linspace(0.0, T - 1e-4, 4000)
    u = c / (T - t)
    est = estimate_blowup_time(t, u, 1e4, p)
    assert est.detected and abs(est.T - T) < 1e-6 and est.fit_quality > 0.999999
    rng = np.random.default_rng(3)
    noisy = estimate_blowup_time(t, u * (1 + 1e-3 * rng.standard_normal(len(t))), 1e4, p)
    assert abs(noisy.T - T) < 1e-3
    coarse = estimate_blowup_time(t, u, 1e3, p)
    assert abs(coarse.T - est.T) < 1e-6
    flat = estimate_blowup_time(t, np.ones_like(t), 1e4, p)
    assert not flat.detected and math.isnan(flat.T)


@pytest.mark.parametrize("d", [0.0, 0.3, -0.3])
def test_blowup_curve_straight_line(d):
    cfg = PhysicalConfig(N=1, r0=2.0, T0=1.0, eps0=0.25, d0=d, dr=2e-3)
    curve = blowup_curve(cfg, [1.95, 2.05])
    assert abs(curve.T_r0 - 1.0) < 1e-3
    assert abs(curve.slope_at_r0 - d) < 1e-2
    assert curve.noncharacteristic and curve.lipschitz_ok
    assert np.all(curve.fit_quality > 0.999)


def test_to_selfsim_recovers_soliton():
    P = SolitonParams(0.3, 0.02)
    cfg = PhysicalConfig(N=3, r0=2.0, T0=1.0, eps0=0.25, d0=P.d, nu0=P.nu, dr=2e-3)
    u0, u1 = build_initial_data(cfg)
    hist = evolve_physical(u0, u1, cfg, snapshot_times=(0.0, 0.02))
    g = build_grid(24, 3.0)
    w = to_selfsim(hist, 2.0, 1.0, 0.0, g)
    ref = kappa_star(P, g)
    assert np.max(np.abs(w.first.values - ref.first.values)) < 1e-7
    assert np.max(np.abs(w.second.values - ref.second.values)) < 1e-6
    with pytest.raises(DomainError):
        to_selfsim(hist, 2.0, 1.0, -1.0, g)


def test_to_selfsim_ode_case_is_kappa0():
    cfg = PhysicalConfig(N=1, r0=2.0, T0=1.0, eps0=0.25, dr=2e-3)
    u0, u1 = build_initial_data(cfg)
    s = 2.0
    hist = evolve_physical(u0, u1, cfg, snapshot_times=(1.0 - math.exp(-s),))
    w = to_selfsim(hist, 2.0, 1.0, s, build_grid(24, 3.0))
    assert np.max(np.abs(w.first.values - kappa0(3.0))) < 1e-6
    assert np.max(np.abs(w.second.values)) < 1e-5


def test_cone_average_zero_and_growth():
    cfg = PhysicalConfig(N=1, M=1.0, t_max=0.5)
    z = np.zeros(len(cfg.r_grid))
    hist = evolve_physical(z, z, cfg, snapshot_times=(0.2,))
    assert cone_average(hist, 0.2, 2.0, 1.0) == 0.0
    cfg = PhysicalConfig(N=1, r0=2.0, T0=1.0, eps0=0.25, dr=2e-3)
    u0, u1 = build_initial_data(cfg)
    times = 1.0 - np.exp(-np.linspace(1.0, 4.0, 7))
    hist = evolve_physical(u0, u1, cfg, snapshot_times=times)
    g = cone_average_growth(hist, times, 2.0, 1.0)
    assert abs(g.exponent - 2.0) < 1e-3 and g.diverging
    with pytest.raises(DomainError):
        cone_average(hist, 1.0, 2.0, 1.0)


@pytest.mark.skipif(kernels.compiled_backend is None, reason="compiled kernels not built")
def test_backends_agree():
    cfg = PhysicalConfig(N=3, r0=2.0, T0=1.0, eps0=0.25, d0=0.3, t_max=0.3)
    u0, u1 = build_initial_data(cfg)
    a = evolve_physical(u0, u1, cfg, snapshot_times=(0.3,), monitor_r=(2.0,), backend="compiled")
    b = evolve_physical(u0, u1, cfg, snapshot_times=(0.3,), monitor_r=(2.0,), backend="python")
    assert a.steps == b.steps
    assert np.max(np.abs(a.snapshot(0.3)[0] - b.snapshot(0.3)[0])) < 1e-12
