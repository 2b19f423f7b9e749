import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from sessilesim import chebgrid
from sessilesim.equilibrium import (
    equilibrium_pressure,
    max_half_width,
    solve_equilibrium,
    solve_half_width,
    width_residual,
)
from sessilesim.params import PhysicalParams

from oracles import shoot_equilibrium

# Reference values for the default drop (mass 1, g 1, sigma 1, gamma_jump 0.6)
# from apex shooting with DOP853 at rtol 1e-11; see oracles.shoot_equilibrium.
ORACLE_ELL = 1.288781231149187
ORACLE_PRESSURE = 1.008704944315279
ORACLE_APEX = 0.5423513609840911


@pytest.fixture(scope="module")
def default_shape():
    return solve_equilibrium(1.0, PhysicalParams())


def test_default_drop_matches_shooting_constants(default_shape):
    s = default_shape
    assert_allclose(s.ell, ORACLE_ELL, rtol=0, atol=1e-9)
    assert_allclose(s.pressure, ORACLE_PRESSURE, rtol=0, atol=1e-9)
    assert_allclose(s.apex_height, ORACLE_APEX, rtol=0, atol=1e-9)


def test_default_profile_matches_live_shooting(default_shape):
    s = default_shape
    o = shoot_equilibrium(1.0, 1.0, 1.0, 0.6)
    xg = np.linspace(0.0, min(s.ell, o["ell"]), 257)
    assert np.max(np.abs(s.height(xg) - o["profile"](xg))) < 1e-9


def test_width_residual_brackets_and_vanishes():
    p = PhysicalParams()
    mass = 1.0
    cap = max_half_width(mass, p)
    assert width_residual(1e-6 * cap, mass, p) < 0
    assert width_residual(0.999 * cap, mass, p) > 0
    ell = solve_half_width(mass, p)
    assert 0 < ell < cap
    assert abs(width_residual(ell, mass, p)) < 1e-10


def test_pressure_identity(default_shape):
    # 2 ell P0 equals g M + 2 sqrt(sigma^2 - gamma_jump^2) by construction
    p = default_shape.params
    lhs = 2.0 * default_shape.ell * default_shape.pressure
    rhs = p.g * default_shape.mass + 2.0 * math.sqrt(p.sigma**2 - p.gamma_jump**2)
    assert_allclose(lhs, rhs, rtol=1e-15)
    assert_allclose(
        equilibrium_pressure(default_shape.mass, default_shape.ell, p),
        default_shape.pressure, rtol=1e-15,
    )


def test_profile_shape_properties(default_shape):
    s = default_shape
    assert s.zeta[0] == 0.0 and s.zeta[-1] == 0.0
    assert np.all(s.zeta[1:-1] > 0)
    assert np.max(np.abs(s.zeta - s.zeta[::-1])) == 0.0
    assert np.max(np.abs(s.dzeta + s.dzeta[::-1])) == 0.0
    assert np.all(s.d2zeta < 0)
    p = s.params
    assert_allclose(s.dzeta[0], p.endpoint_slope, rtol=1e-13)
    assert_allclose(s.dzeta[-1], -p.endpoint_slope, rtol=1e-13)
    mid = s.x.size // 2
    assert s.x[mid] == 0.0 and s.dzeta[mid] == 0.0
    assert_allclose(s.zeta[mid], s.apex_height, rtol=1e-14)


def test_capillary_balance_at_nodes(default_shape):
    s = default_shape
    p = s.params
    lhs = p.sigma * s.d2zeta / (1.0 + s.dzeta**2) ** 1.5
    rhs = p.g * s.zeta - s.pressure
    assert np.max(np.abs(lhs - rhs)) < 1e-13 * s.pressure


def test_quadrature_mass(default_shape):
    assert_allclose(default_shape.quadrature_mass(), 1.0, rtol=0, atol=1e-12)


def test_evaluators_reproduce_nodes(default_shape):
    s = default_shape
    sub = slice(3, -3, 17)
    assert_allclose(s.height(s.x[sub]), s.zeta[sub], rtol=0, atol=1e-13)
    assert_allclose(s.slope(s.x[sub]), s.dzeta[sub], rtol=0, atol=1e-12)
    assert_allclose(s.curvature(s.x[sub]), s.d2zeta[sub], rtol=0, atol=1e-11)
    assert np.isscalar(float(s.height(0.3)))


def test_slope_is_derivative_of_height(default_shape):
    # resample to a coarser spectral grid and differentiate there
    s = default_shape
    x = chebgrid.lobatto_nodes(256, -s.ell, s.ell)
    d = chebgrid.diffmat(x)
    err = np.max(np.abs(d @ s.height(x) - s.slope(x)))
    assert err < 1e-8 * np.max(np.abs(s.dzeta))


def test_rejects_bad_inputs():
    p = PhysicalParams()
    with pytest.raises(ValueError):
        solve_equilibrium(-1.0, p)
    with pytest.raises(ValueError):
        solve_equilibrium(1.0, p, n_profile=101)


@given(
    mass=st.floats(min_value=0.3, max_value=3.0),
    g=st.floats(min_value=0.2, max_value=3.0),
    sigma=st.floats(min_value=0.5, max_value=2.0),
    ratio=st.floats(min_value=0.2, max_value=0.88),
)
@settings(max_examples=12, deadline=None)
def test_solve_properties_random_params(mass, g, sigma, ratio):
    p = PhysicalParams(g=g, sigma=sigma, gamma_jump=ratio * sigma)
    s = solve_equilibrium(mass, p, n_profile=512)
    assert_allclose(s.quadrature_mass(), mass, rtol=1e-10)
    assert_allclose(s.dzeta[0], p.endpoint_slope, rtol=1e-12)
    balance = p.sigma * s.d2zeta / (1.0 + s.dzeta**2) ** 1.5 - (p.g * s.zeta - s.pressure)
    assert np.max(np.abs(balance)) < 1e-12 * s.pressure
    assert np.all(s.zeta[1:-1] > 0)


def test_heavy_drop_approaches_puddle_limits():
    # wide pancake: half-width saturates at the cap and the pressure tends to
    # the hydrostatic value of the limiting puddle height
    p = PhysicalParams(g=2.0, gamma_jump=0.6)
    mass = 50.0
    ell = solve_half_width(mass, p)
    cap = max_half_width(mass, p)
    assert 0.999 * cap < ell <= cap
    p0 = equilibrium_pressure(mass, ell, p)
    assert_allclose(p0, math.sqrt(2.0 * p.g * (p.sigma - p.gamma_jump)), rtol=1e-8)
    # the profile chart degenerates out here and must refuse cleanly
    with pytest.raises(RuntimeError, match="puddle"):
        solve_equilibrium(mass, p)


def test_moderately_heavy_drop_profile():
    p = PhysicalParams(g=2.0, gamma_jump=0.6)
    s = solve_equilibrium(6.0, p, n_profile=2048)
    h_inf = math.sqrt(2.0 * (p.sigma - p.gamma_jump) / p.g)
    assert s.apex_height < h_inf
    assert abs(s.apex_height - h_inf) < 0.05 * h_inf
    assert_allclose(s.quadrature_mass(), 6.0, rtol=1e-10)
