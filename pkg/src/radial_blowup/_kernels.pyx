# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled RK4 kernels for the two method-of-lines systems."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, fabs, pow, isfinite

cnp.import_array()


cdef inline double _power_term(double w, double p, bint cubic) noexcept nogil:
    if cubic:
        return w * w * w
    return pow(fabs(w), p - 1.0) * w


cdef void _selfsim_rhs(
    double[::1] w1, double[::1] w2, const double[:, ::1] L, const double[:, ::1] D,
    const double[::1] y, double p, int N, double r0, double s,
    double[::1] out1, double[::1] out2,
) noexcept nogil:
    cdef Py_ssize_t n = w1.shape[0]
    cdef Py_ssize_t i, j
    cdef double lw, dw1, dw2, es, rad
    cdef double c_lin = 2.0 * (p + 1.0) / ((p - 1.0) * (p - 1.0))
    cdef double c_damp = (p + 3.0) / (p - 1.0)
    cdef bint cubic = p == 3.0
    es = exp(-s)
    for i in range(n):
        lw = 0.0
        dw1 = 0.0
        dw2 = 0.0
        for j in range(n):
            lw += L[i, j] * w1[j]
            dw1 += D[i, j] * w1[j]
            dw2 += D[i, j] * w2[j]
        out1[i] = w2[i]
        out2[i] = lw - c_lin * w1[i] + _power_term(w1[i], p, cubic) - c_damp * w2[i] - 2.0 * y[i] * dw2
        if N != 1:
            rad = es * (N - 1) / (r0 + y[i] * es)
            out2[i] += rad * dw1


def selfsim_advance(
    double[::1] w1, double[::1] w2, const double[:, ::1] L, const double[:, ::1] D,
    const double[::1] y, double p, int N, double r0, double s, double ds, int nsteps,
):
    """Advance ``(w1, w2)`` in place by ``nsteps`` RK4 steps; return 0, or 1 on non-finite output."""
    cdef Py_ssize_t n = w1.shape[0]
    cdef Py_ssize_t i
    cdef int k
    cdef double[::1] k1a = np.empty(n), k1b = np.empty(n)
    cdef double[::1] k2a = np.empty(n), k2b = np.empty(n)
    cdef double[::1] k3a = np.empty(n), k3b = np.empty(n)
    cdef double[::1] k4a = np.empty(n), k4b = np.empty(n)
    cdef double[::1] ta = np.empty(n), tb = np.empty(n)
    cdef double h2 = 0.5 * ds, h6 = ds / 6.0
    cdef double s_k
    cdef int status = 0
    with nogil:
        for k in range(nsteps):
            s_k = s + k * ds
            _selfsim_rhs(w1, w2, L, D, y, p, N, r0, s_k, k1a, k1b)
            for i in range(n):
                ta[i] = w1[i] + h2 * k1a[i]
                tb[i] = w2[i] + h2 * k1b[i]
            _selfsim_rhs(ta, tb, L, D, y, p, N, r0, s_k + h2, k2a, k2b)
            for i in range(n):
                ta[i] = w1[i] + h2 * k2a[i]
                tb[i] = w2[i] + h2 * k2b[i]
            _selfsim_rhs(ta, tb, L, D, y, p, N, r0, s_k + h2, k3a, k3b)
            for i in range(n):
                ta[i] = w1[i] + ds * k3a[i]
                tb[i] = w2[i] + ds * k3b[i]
            _selfsim_rhs(ta, tb, L, D, y, p, N, r0, s_k + ds, k4a, k4b)
            for i in range(n):
                w1[i] = w1[i] + h6 * (k1a[i] + 2.0 * k2a[i] + 2.0 * k3a[i] + k4a[i])
                w2[i] = w2[i] + h6 * (k1b[i] + 2.0 * k2b[i] + 2.0 * k3b[i] + k4b[i])
                if not (isfinite(w1[i]) and isfinite(w2[i])):
                    status = 1
            if status:
                break
    return status


cdef void _wave_rhs(
    double[::1] u, double[::1] v, const double[::1] inv_r, double dr, int N, double p,
    const unsigned char[::1] frozen, double[::1] du, double[::1] dv,
) noexcept nogil:
    cdef Py_ssize_t n = u.shape[0]
    cdef Py_ssize_t i
    cdef double idr2 = 1.0 / (dr * dr), i2dr = 0.5 / dr
    cdef bint cubic = p == 3.0
    for i in range(1, n - 1):
        du[i] = v[i]
        dv[i] = (u[i + 1] - 2.0 * u[i] + u[i - 1]) * idr2 + _power_term(u[i], p, cubic)
        if N != 1:
            dv[i] += (N - 1) * inv_r[i] * (u[i + 1] - u[i - 1]) * i2dr
    # outgoing (Sommerfeld) ends: v_t = +v_r at the left edge, -v_r at the right edge
    du[0] = v[0]
    dv[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) * i2dr
    du[n - 1] = v[n - 1]
    dv[n - 1] = -(3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) * i2dr
    for i in range(n):
        if frozen[i]:
            du[i] = 0.0
            dv[i] = 0.0


def wave_rk4_step(
    double[::1] u, double[::1] v, const double[::1] inv_r, double dr, double dt,
    int N, double p, const unsigned char[::1] frozen,
):
    """One RK4 step of the radial wave system, in place; return 0, or 1 on non-finite output."""
    cdef Py_ssize_t n = u.shape[0]
    cdef Py_ssize_t i
    cdef double[::1] k1a = np.empty(n), k1b = np.empty(n)
    cdef double[::1] k2a = np.empty(n), k2b = np.empty(n)
    cdef double[::1] k3a = np.empty(n), k3b = np.empty(n)
    cdef double[::1] k4a = np.empty(n), k4b = np.empty(n)
    cdef double[::1] ta = np.empty(n), tb = np.empty(n)
    cdef double h2 = 0.5 * dt, h6 = dt / 6.0
    cdef int status = 0
    with nogil:
        _wave_rhs(u, v, inv_r, dr, N, p, frozen, k1a, k1b)
        for i in range(n):
            ta[i] = u[i] + h2 * k1a[i]
            tb[i] = v[i] + h2 * k1b[i]
        _wave_rhs(ta, tb, inv_r, dr, N, p, frozen, k2a, k2b)
        for i in range(n):
            ta[i] = u[i] + h2 * k2a[i]
            tb[i] = v[i] + h2 * k2b[i]
        _wave_rhs(ta, tb, inv_r, dr, N, p, frozen, k3a, k3b)
        for i in range(n):
            ta[i] = u[i] + dt * k3a[i]
            tb[i] = v[i] + dt * k3b[i]
        _wave_rhs(ta, tb, inv_r, dr, N, p, frozen, k4a, k4b)
        for i in range(n):
            u[i] = u[i] + h6 * (k1a[i] + 2.0 * k2a[i] + 2.0 * k3a[i] + k4a[i])
            v[i] = v[i] + h6 * (k1b[i] + 2.0 * k2b[i] + 2.0 * k3b[i] + k4b[i])
            if not (isfinite(u[i]) and isfinite(v[i])):
                status = 1
    return status
