import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.special import beta

from radial_blowup.errors import GridMismatchError, ParameterError
from radial_blowup.spectral import (
    Field,
    apply_L,
    build_grid,
    inner_phi,
    integrate,
    integrate_singular,
    norm_H,
    norm_H0,
    weighted_norms,
)

from conftest import random_poly_pair


def moment(k, a):
    """int_{-1}^{1} y^k (1-y^2)^a dy in closed form."""
    if k % 2:
        return 0.0
    return beta((k + 1) / 2.0, a + 1.0)


def test_weight_sums():
    assert abs(build_grid(16, 3.0).quad_weights.sum() - 4.0 / 3.0) < 1e-12
    assert abs(build_grid(24, 2.0).quad_weights.sum() - 16.0 / 15.0) < 1e-12


def test_odd_moment_vanishes():
    g = build_grid(16, 3.0)
    assert abs(integrate(g, g.nodes)) < 1e-13


@pytest.mark.parametrize("n,p", [(8, 3.0), (16, 3.0), (20, 2.0), (24, 5.0), (16, 1.5)])
def test_gauss_exactness(n, p):
    g = build_grid(n, p)
    a = g.alpha
    for k in range(2 * n):
        exact = moment(k, a)
        assert abs(integrate(g, g.nodes**k) - exact) < 1e-10, k


@pytest.mark.parametrize("n,p", [(16, 3.0), (24, 5.0)])
def test_singular_rule_exactness(n, p):
    g = build_grid(n, p)
    for k in range(n):
        assert abs(integrate_singular(g, g.nodes**k) - moment(k, g.alpha - 1.0)) < 1e-10


def test_grid_properties():
    g = build_grid(32, 3.0)
    assert np.all(np.abs(g.nodes) < 1.0)
    assert np.all(g.quad_weights > 0.0)
    assert build_grid(32, 3.0) is g


@pytest.mark.parametrize("n", [16, 32, 64])
def test_differentiation_of_monomials(n):
    g = build_grid(n, 3.0)
    y = g.nodes
    for k in range(1, n // 2 + 1):
        assert np.max(np.abs(g.diff @ y**k - k * y ** (k - 1))) < 1e-10


@pytest.mark.parametrize("n,p", [(7, 3.0), (16, 1.0), (16, 0.5), (12.5, 3.0)])
def test_invalid_grid(n, p):
    with pytest.raises(ParameterError):
        build_grid(n, p)


def test_field_validation():
    g = build_grid(16, 3.0)
    with pytest.raises(ParameterError):
        Field(np.ones(15), g)
    bad = np.ones(16)
    bad[3] = np.nan
    with pytest.raises(ParameterError):
        g.field(bad)


def test_grid_mismatch():
    a = build_grid(16, 3.0).pair(np.ones(16), np.zeros(16))
    b = build_grid(18, 3.0).pair(np.ones(18), np.zeros(18))
    with pytest.raises(GridMismatchError):
        inner_phi(a, b)


def test_inner_phi_examples(rng):
    g = build_grid(16, 3.0)
    zero = g.pair(np.zeros(16), np.zeros(16))
    one = g.pair(np.ones(16), np.zeros(16))
    assert inner_phi(zero, zero) == 0.0
    assert abs(inner_phi(one, one) - 4.0 / 3.0) < 1e-12
    a, b = random_poly_pair(g, rng), random_poly_pair(g, rng)
    assert inner_phi(a, b) == inner_phi(b, a)


def test_norms(rng):
    g = build_grid(16, 3.0)
    assert norm_H(g.pair(np.zeros(16), np.zeros(16))) == 0.0
    assert abs(norm_H(g.pair(np.ones(16), np.zeros(16))) - np.sqrt(4.0 / 3.0)) < 1e-12
    a = random_poly_pair(g, rng)
    assert abs(norm_H(a * -2.5) - 2.5 * norm_H(a)) < 1e-12
    assert abs(norm_H(a) ** 2 - inner_phi(a, a)) < 1e-12 * max(1.0, inner_phi(a, a))
    assert norm_H0(g.field(np.zeros(16))) == 0.0
    assert abs(norm_H0(g.field(np.ones(16))) - np.sqrt(4.0 / 3.0)) < 1e-12


def test_norm_H0_of_y_against_adaptive_quadrature():
    g = build_grid(16, 3.0)
    rho = lambda y: 1.0 - y * y
    val, _ = quad(lambda y: (y * y + (1.0 - y * y)) * rho(y), -1.0, 1.0, epsabs=1e-14)
    assert abs(norm_H0(g.field(g.nodes)) - np.sqrt(val)) < 1e-12


def test_apply_L(rng):
    g = build_grid(32, 3.0)
    assert np.max(np.abs(apply_L(g.field(np.full(32, 2.0))).values)) < 1e-10
    y = g.nodes
    for _ in range(5):
        f = g.field(np.polyval(rng.standard_normal(8), y))
        h = g.field(np.polyval(rng.standard_normal(8), y))
        lhs = integrate(g, apply_L(f).values * h.values)
        rhs = integrate(g, f.values * apply_L(h).values)
        assert abs(lhs - rhs) < 1e-9
        phi = inner_phi(g.pair(f.values, np.zeros(32)), g.pair(h.values, np.zeros(32)))
        assert abs(phi - integrate(g, f.values * (h.values - apply_L(h).values))) < 1e-9


def test_apply_L_on_legendre_like_eigenfunction():
    # L y = -2(alpha+1) y exactly
    g = build_grid(24, 3.0)
    out = apply_L(g.field(g.nodes)).values
    assert np.max(np.abs(out + 2.0 * (g.alpha + 1.0) * g.nodes)) < 1e-10


def test_weighted_norms_examples():
    g = build_grid(16, 3.0)
    z = weighted_norms(g.field(np.zeros(16)))
    assert (z.l2_singular, z.lp1, z.sup_weighted) == (0.0, 0.0, 0.0)
    one = weighted_norms(g.field(np.ones(16)))
    assert abs(one.l2_singular - np.sqrt(2.0)) < 1e-12
    # int (1-y^2) dy = 4/3 with p + 1 = 4
    assert abs(one.lp1 - (4.0 / 3.0) ** 0.25) < 1e-12


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=2, max_size=8), st.lists(st.floats(-3, 3), min_size=2, max_size=8))
def test_phi_positive_semidefinite(c1, c2):
    g = build_grid(24, 3.0)
    y = g.nodes
    a = g.pair(np.polyval(c1, y), np.polyval(c2, y))
    assert inner_phi(a, a) >= -1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(8, 40), st.floats(1.2, 9.0))
def test_weights_sum_to_weight_integral(n, p):
    g = build_grid(n, p)
    assert abs(g.quad_weights.sum() - moment(0, g.alpha)) < 1e-10
