"""Pure NumPy versions of the compiled kernels (same signatures and semantics)."""

import numpy as np


def _power_term(w, p):
    if p == 3.0:
        return w * w * w
    return np.abs(w) ** (p - 1.0) * w


def selfsim_rhs(w1, w2, L, D, y, p, N, r0, s):
    out2 = L @ w1 - 2.0 * (p + 1.0) / (p - 1.0) ** 2 * w1 + _power_term(w1, p) - (p + 3.0) / (p - 1.0) * w2
    out2 -= 2.0 * y * (D @ w2)
    if N != 1:
        es = np.exp(-s)
        out2 += es * (N - 1) / (r0 + y * es) * (D @ w1)
    return w2.copy(), out2


def selfsim_advance(w1, w2, L, D, y, p, N, r0, s, ds, nsteps):
    h2 = 0.5 * ds
    for k in range(nsteps):
        s_k = s + k * ds
        a1, a2 = selfsim_rhs(w1, w2, L, D, y, p, N, r0, s_k)
        b1, b2 = selfsim_rhs(w1 + h2 * a1, w2 + h2 * a2, L, D, y, p, N, r0, s_k + h2)
        c1, c2 = selfsim_rhs(w1 + h2 * b1, w2 + h2 * b2, L, D, y, p, N, r0, s_k + h2)
        e1, e2 = selfsim_rhs(w1 + ds * c1, w2 + ds * c2, L, D, y, p, N, r0, s_k + ds)
        w1 += ds / 6.0 * (a1 + 2.0 * b1 + 2.0 * c1 + e1)
        w2 += ds / 6.0 * (a2 + 2.0 * b2 + 2.0 * c2 + e2)
        if not (np.all(np.isfinite(w1)) and np.all(np.isfinite(w2))):
            return 1
    return 0


def wave_rhs(u, v, inv_r, dr, N, p, frozen):
    du = v.copy()
    dv = np.empty_like(u)
    dv[1:-1] = (u[2:] - 2.0 * u[1:-1] + u[:-2]) / (dr * dr) + _power_term(u[1:-1], p)
    if N != 1:
        dv[1:-1] += (N - 1) * inv_r[1:-1] * (u[2:] - u[:-2]) * (0.5 / dr)
    dv[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) * (0.5 / dr)
    dv[-1] = -(3.0 * v[-1] - 4.0 * v[-2] + v[-3]) * (0.5 / dr)
    mask = frozen.astype(bool)
    du[mask] = 0.0
    dv[mask] = 0.0
    return du, dv


def wave_rk4_step(u, v, inv_r, dr, dt, N, p, frozen):
    h2 = 0.5 * dt
    a1, a2 = wave_rhs(u, v, inv_r, dr, N, p, frozen)
    b1, b2 = wave_rhs(u + h2 * a1, v + h2 * a2, inv_r, dr, N, p, frozen)
    c1, c2 = wave_rhs(u + h2 * b1, v + h2 * b2, inv_r, dr, N, p, frozen)
    e1, e2 = wave_rhs(u + dt * c1, v + dt * c2, inv_r, dr, N, p, frozen)
    u += dt / 6.0 * (a1 + 2.0 * b1 + 2.0 * c1 + e1)
    v += dt / 6.0 * (a2 + 2.0 * b2 + 2.0 * c2 + e2)
    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
        return 1
    return 0
