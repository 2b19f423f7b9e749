"""Surface coupling layer: contact law, transport, loads, energy audits."""

import math

import numpy as np
import pytest

from sessilesim import (
    AssemblyError,
    FitError,
    LinearResponse,
    PhysicalParams,
    SinhResponse,
    SurfaceGrid,
    SurfaceLoads,
    SurfaceState,
    contact_dissipation,
    contact_flux,
    contact_rates,
    contact_slope_identity,
    contact_velocity,
    center_of_mass,
    dissipation,
    energy,
    energy_identity_residual,
    fit_decay_rate,
    mass,
    one_sided_slope,
    solve_equilibrium,
    surface_load_covector,
    surface_work,
    transport_rate,
)
from sessilesim import chebgrid
from sessilesim.chebgrid import clenshaw_curtis_weights, lobatto_nodes, barycentric_eval
from sessilesim.dynamics import ContactRates


def make_setup(n=256, droplet_mass=1.0, drag=1.3):
    p = PhysicalParams()
    shape = solve_equilibrium(droplet_mass, p)
    grid = SurfaceGrid(n, shape.ell)
    return p, shape, grid, LinearResponse(drag=drag)


def smooth_eps(grid, rng, amp):
    """Random low-mode perturbation pinned at both endpoints."""
    e = np.zeros_like(grid.x)
    for k in range(1, 7):
        e += rng.normal() * np.sin(k * np.pi * (grid.x + grid.ell) / (2 * grid.ell))
    e *= amp / np.max(np.abs(e))
    e[0] = e[-1] = 0.0
    return e


def energy_rate(state, shape, p, rates, v):
    """Exact derivative of the discrete energy along (v, ldot, rdot).

    Straight chain rule on the quadrature sums, no integration by parts;
    this is the independent side of the energy identity checks below.
    """
    grid = state.grid
    j1 = state.j1
    zeta = state.height(shape)
    mh = state.slope(shape) / j1
    s = np.sqrt(1.0 + mh * mh)
    jdot = (rates.rdot - rates.ldot) / (2.0 * grid.ell)
    dmh = (grid.D @ v) / j1 - mh * jdot / j1
    return (
        p.g * j1 * grid.inner(zeta, v)
        + 0.5 * p.g * jdot * grid.inner(zeta, zeta)
        + p.sigma * jdot * grid.inner(s)
        + p.sigma * j1 * grid.inner(mh / s, dmh)
        - p.gamma_jump * (rates.rdot - rates.ldot)
    )


def corner_balance(state, shape, p, rates, w_hat):
    """What dE/dt + L(w) must equal: dynamic-angle work plus trace mismatch."""
    zx = state.slope(shape)
    mh = zx / state.j1
    s_l = math.sqrt(1.0 + mh[0] ** 2)
    s_r = math.sqrt(1.0 + mh[-1] ** 2)
    u_l = -w_hat[0] / zx[0]
    u_r = -w_hat[-1] / zx[-1]
    return (
        (p.sigma / s_r - p.gamma_jump) * rates.rdot
        - (p.sigma / s_l - p.gamma_jump) * rates.ldot
        + p.sigma * mh[-1] ** 2 / s_r * (rates.rdot - u_r)
        - p.sigma * mh[0] ** 2 / s_l * (rates.ldot - u_l)
    )


class TestContactVelocity:
    def test_reference_value(self):
        p = PhysicalParams(sigma=1.0, gamma_jump=0.6)
        v = contact_velocity(p, LinearResponse(drag=1.0), 1.0, "left")
        assert v == pytest.approx(1.0 / math.sqrt(2.0) - 0.6, abs=1e-15)
        assert v == pytest.approx(0.10711, abs=5e-6)

    def test_equilibrium_slope_is_stationary(self):
        p, shape, grid, resp = make_setup()
        for side, xq in (("left", -shape.ell), ("right", shape.ell)):
            v = contact_velocity(p, resp, shape.slope(xq), side)
            assert abs(v) < 1e-14

    def test_sides_mirror(self):
        p = PhysicalParams()
        resp = SinhResponse(a=0.7, b=2.0)
        for s in (0.3, 0.9, 1.8, 4.0):
            vl = contact_velocity(p, resp, s, "left")
            vr = contact_velocity(p, resp, s, "right")
            assert vl == pytest.approx(-vr, abs=1e-15)

    def test_rejects_bad_input(self):
        p = PhysicalParams()
        resp = LinearResponse()
        with pytest.raises(ValueError):
            contact_velocity(p, resp, 1.0, "top")
        with pytest.raises(ValueError):
            contact_velocity(p, resp, math.nan, "left")


class TestOneSidedSlope:
    def test_exact_on_quadratics(self):
        x = lobatto_nodes(32, -1.0, 1.0)
        v = 3.0 * x * x - 2.0 * x + 1.0
        assert one_sided_slope(x, v, "left") == pytest.approx(6.0 * x[0] - 2.0, abs=1e-12)
        assert one_sided_slope(x, v, "right") == pytest.approx(6.0 * x[-1] - 2.0, abs=1e-12)

    def test_second_order_on_clustered_nodes(self):
        errs = []
        for n in (64, 128):
            x = lobatto_nodes(n, -1.0, 1.0)
            v = np.sin(2.0 * x)
            errs.append(abs(one_sided_slope(x, v, "right") - 2.0 * math.cos(2.0)))
        # node spacing near the endpoint scales like n^-2
        assert errs[0] / errs[1] > 8.0

    def test_rejects_bad_side(self):
        x = lobatto_nodes(8, -1.0, 1.0)
        with pytest.raises(ValueError):
            one_sided_slope(x, x, "middle")


class TestContactRates:
    def test_equilibrium_is_stationary(self):
        p, shape, grid, resp = make_setup()
        state = SurfaceState(grid, np.zeros_like(grid.x))
        rates = contact_rates(state, shape, p, resp)
        assert abs(rates.ldot) < 1e-14
        assert abs(rates.rdot) < 1e-14

    def test_matches_law_at_stencil_slope(self):
        p, shape, grid, resp = make_setup()
        rng = np.random.default_rng(3)
        state = SurfaceState(grid, smooth_eps(grid, rng, 0.03), l=0.02, r=-0.01)
        rates = contact_rates(state, shape, p, resp)
        k1 = state.k1
        mh_l = (1.0 + k1) * (shape.slope(-grid.ell) + one_sided_slope(grid.x, state.eps, "left"))
        assert rates.mhat_left == pytest.approx(mh_l, rel=1e-14)
        assert rates.ldot == pytest.approx(contact_velocity(p, resp, mh_l, "left"), rel=1e-14)


class TestTransportRate:
    def test_equilibrium_rest_state(self):
        p, shape, grid, resp = make_setup()
        state = SurfaceState(grid, np.zeros_like(grid.x))
        rates = contact_rates(state, shape, p, resp)
        dte = transport_rate(state, np.zeros_like(grid.x), shape, rates)
        assert np.max(np.abs(dte)) < 1e-13

    def test_pure_dilation_advects_profile(self):
        p, shape, grid, _ = make_setup()
        state = SurfaceState(grid, np.zeros_like(grid.x), l=0.05, r=0.02)
        rates = ContactRates(ldot=0.3, rdot=-0.1, mhat_left=0.0, mhat_right=0.0)
        dte = transport_rate(state, np.zeros_like(grid.x), shape, rates)
        j1 = state.j1
        affine = 0.3 + (grid.x + grid.ell) / (2.0 * grid.ell) * (-0.1 - 0.3)
        expected = affine * state.slope(shape) / j1
        assert np.allclose(dte, expected, atol=1e-14)

    def test_shape_mismatch_rejected(self):
        p, shape, grid, resp = make_setup()
        state = SurfaceState(grid, np.zeros_like(grid.x))
        rates = contact_rates(state, shape, p, resp)
        with pytest.raises(ValueError):
            transport_rate(state, np.zeros(grid.x.size - 1), shape, rates)


class TestEnergy:
    def test_equilibrium_excess_vanishes_identically(self):
        p, shape, grid, _ = make_setup()
        state = SurfaceState(grid, np.zeros_like(grid.x))
        assert energy(state, shape, p).excess == 0.0

    def test_lower_bound(self):
        p, shape, grid, _ = make_setup()
        rng = np.random.default_rng(11)
        for _ in range(10):
            state = SurfaceState(
                grid,
                smooth_eps(grid, rng, 0.2),
                l=rng.uniform(-0.2, 0.2),
                r=rng.uniform(-0.2, 0.2),
            )
            width = 2.0 * grid.ell + state.r - state.l
            bound = (p.sigma - p.gamma_jump) * width
            assert energy(state, shape, p).total > bound

    def test_flat_profile_closed_form(self):
        p, shape, grid, _ = make_setup()
        h = 0.4
        eps = h - shape.height(grid.x)
        state = SurfaceState(grid, eps)
        w = 2.0 * grid.ell
        expected = 0.5 * p.g * w * h * h + p.sigma * w - p.gamma_jump * w
        assert energy(state, shape, p).total == pytest.approx(expected, rel=1e-8)


class TestMassAndCenter:
    def test_equilibrium_mass_matches_profile(self):
        p, shape, grid, _ = make_setup()
        state = SurfaceState(grid, np.zeros_like(grid.x))
        assert mass(state, shape) == pytest.approx(shape.mass, rel=1e-10)

    def test_dual_coordinate_quadrature(self):
        # same area computed on the physical interval with its own nodes
        p, shape, grid, _ = make_setup()
        rng = np.random.default_rng(5)
        state = SurfaceState(grid, smooth_eps(grid, rng, 0.05), l=0.04, r=-0.03)
        lo = -grid.ell + state.l
        hi = grid.ell + state.r
        xq = lobatto_nodes(200, lo, hi)
        wq = clenshaw_curtis_weights(200, lo, hi)
        pullback = (xq - 0.5 * (state.r + state.l)) / state.j1
        heights = barycentric_eval(grid.x, state.height(shape), pullback)
        physical = float(wq @ heights)
        assert mass(state, shape) == pytest.approx(physical, abs=1e-10)

    def test_symmetric_state_centered(self):
        p, shape, grid, _ = make_setup()
        eps = 0.05 * np.cos(np.pi * grid.x / (2.0 * grid.ell)) ** 2
        eps[0] = eps[-1] = 0.0
        state = SurfaceState(grid, eps)
        x1, x2 = center_of_mass(state, shape)
        assert abs(x1) < 1e-13
        assert x2 > 0.0

    def test_translation_covariance(self):
        p, shape, grid, _ = make_setup()
        rng = np.random.default_rng(6)
        eps = smooth_eps(grid, rng, 0.05)
        x1_a, x2_a = center_of_mass(SurfaceState(grid, eps), shape)
        x1_b, x2_b = center_of_mass(SurfaceState(grid, eps, l=0.07, r=0.07), shape)
        assert x1_b == pytest.approx(x1_a + 0.07, abs=1e-12)
        assert x2_b == pytest.approx(x2_a, abs=1e-12)


class TestDissipation:
    def test_nonnegative_for_odd_increasing_laws(self):
        rng = np.random.default_rng(9)
        for resp in (LinearResponse(drag=0.5), SinhResponse(a=1.2, b=0.8)):
            for _ in range(20):
                ld, rd = rng.normal(size=2)
                assert contact_dissipation(resp, ld, rd) >= 0.0

    def test_total_adds_flow_power(self):
        resp = LinearResponse(drag=2.0)
        assert dissipation(0.3, resp, 0.1, -0.2) == pytest.approx(
            0.3 + 2.0 * (0.1 ** 2 + 0.2 ** 2), abs=1e-15
        )


class TestIdentityResidual:
    def test_synthetic_exponential(self):
        t = np.arange(0.0, 1.0 + 1e-9, 1e-3)
        e = np.exp(-2.0 * t)
        d = 2.0 * np.exp(-2.0 * t)
        res = energy_identity_residual(t, e, d)
        assert np.max(res) < 1e-6

    def test_needs_three_samples(self):
        with pytest.raises(ValueError):
            energy_identity_residual([0.0, 1.0], [1.0, 0.5], [1.0, 0.5])

    def test_stationary_run_is_clean(self):
        t = np.linspace(0.0, 1.0, 11)
        res = energy_identity_residual(t, np.ones_like(t), np.zeros_like(t))
        assert np.max(res) == 0.0


class TestDecayFit:
    def test_clean_exponential(self):
        t = np.linspace(0.0, 5.0, 2001)
        fit = fit_decay_rate(t, np.exp(-3.0 * t))
        assert fit.rate == pytest.approx(3.0, abs=1e-6)
        assert fit.r_squared > 0.999999

    def test_modulated_exponential(self):
        t = np.linspace(0.0, 5.0, 2001)
        fit = fit_decay_rate(t, np.exp(-3.0 * t) * (1.0 + 0.01 * np.sin(t)))
        assert fit.rate == pytest.approx(3.0, abs=0.02)
        assert fit.r_squared > 0.98

    def test_nonpositive_tail_raises(self):
        t = np.linspace(0.0, 1.0, 50)
        with pytest.raises(FitError):
            fit_decay_rate(t, -np.ones_like(t))

    def test_transient_dropped(self):
        t = np.linspace(0.0, 5.0, 1000)
        fit = fit_decay_rate(t, np.exp(-3.0 * t), drop_fraction=0.2)
        assert fit.n_used == 800


class TestContactSlopeIdentity:
    def test_roundtrip_to_stencil_slopes(self):
        p, shape, grid, resp = make_setup()
        rng = np.random.default_rng(13)
        state = SurfaceState(grid, smooth_eps(grid, rng, 0.03), l=0.01, r=0.02)
        rates = contact_rates(state, shape, p, resp)
        left, right = contact_slope_identity(state, shape, p, resp, rates)
        assert left == pytest.approx(one_sided_slope(grid.x, state.eps, "left"), abs=1e-12)
        assert right == pytest.approx(one_sided_slope(grid.x, state.eps, "right"), abs=1e-12)

    def test_degenerate_rates_rejected(self):
        p, shape, grid, resp = make_setup()
        state = SurfaceState(grid, np.zeros_like(grid.x))
        bad = ContactRates(ldot=10.0, rdot=0.0, mhat_left=0.0, mhat_right=0.0)
        with pytest.raises(ValueError):
            contact_slope_identity(state, shape, p, resp, bad)


class TestTraceProjection:
    def test_band_limited_traces_pass_through(self):
        # anything already inside the retained band, endpoints included,
        # is reproduced exactly; this is what makes corner evaluation of
        # the projected trace a bounded functional
        _, shape, grid, _ = make_setup()
        rng = np.random.default_rng(17)
        coeffs = np.zeros(grid.x.size)
        coeffs[: grid.n // 2 + 1] = rng.normal(size=grid.n // 2 + 1)
        v = chebgrid.cheb_values(coeffs)
        out = grid.project_trace(v)
        assert np.allclose(out, v, atol=1e-12)

    def test_kills_high_band(self):
        _, shape, grid, _ = make_setup()
        rng = np.random.default_rng(20)
        coeffs = np.zeros(grid.x.size)
        coeffs[grid.n // 2 + 1:] = rng.normal(size=grid.n - grid.n // 2)
        v = chebgrid.cheb_values(coeffs)
        out = grid.project_trace(v)
        assert np.allclose(out, 0.0, atol=1e-12)

    def test_idempotent(self):
        _, shape, grid, _ = make_setup()
        rng = np.random.default_rng(18)
        v = grid.project_trace(rng.normal(size=grid.x.size))
        again = grid.project_trace(v)
        assert np.allclose(again, v, atol=1e-12)

    def test_matrix_matches_function(self):
        _, shape, grid, _ = make_setup()
        rng = np.random.default_rng(19)
        proj = grid.trace_projection_matrix()
        for _ in range(5):
            v = rng.normal(size=grid.x.size)
            assert np.allclose(proj @ v, grid.project_trace(v), atol=1e-12)

    def test_endpoint_row_is_bounded(self):
        # the projected endpoint value is controlled by the trace's
        # quadrature norm with a grid-fixed constant, unlike raw endpoint
        # sampling whose response grows under mesh refinement
        _, shape, grid, _ = make_setup()
        proj = grid.trace_projection_matrix()
        wsqrt = np.sqrt(np.maximum(grid.w, 0.0))
        bound = float(np.linalg.norm(proj[0] / np.maximum(wsqrt, 1e-300)))
        rng = np.random.default_rng(21)
        for _ in range(10):
            v = rng.normal(size=grid.x.size)
            val = abs(float(proj[0] @ v))
            norm = float(np.sqrt(grid.inner(v, v)))
            assert val <= bound * norm + 1e-12


class TestSurfaceLoads:
    def test_equilibrium_work_is_pressure_times_flux(self):
        # at equilibrium the load functional reduces to the mass multiplier
        p, shape, grid, _ = make_setup()
        state = SurfaceState(grid, np.zeros_like(grid.x))
        loads = SurfaceLoads.from_state(state, shape, p)
        rng = np.random.default_rng(23)
        for _ in range(20):
            w = grid.project_trace(rng.normal(size=grid.x.size))
            flux = grid.inner(w)
            assert surface_work(loads, grid, w) == pytest.approx(
                -shape.pressure * flux, abs=1e-11
            )

    def test_covector_represents_work(self):
        p, shape, grid, _ = make_setup()
        rng = np.random.default_rng(29)
        state = SurfaceState(grid, smooth_eps(grid, rng, 0.04), l=-0.02, r=0.05)
        loads = SurfaceLoads.from_state(state, shape, p)
        cov = surface_load_covector(loads, grid)
        for _ in range(5):
            w = rng.normal(size=grid.x.size)
            direct = surface_work(loads, grid, w)
            assert float(cov @ w) == pytest.approx(direct, abs=1e-12 + 1e-12 * abs(direct))

    def test_work_rejects_wrong_grid(self):
        p, shape, grid, _ = make_setup()
        state = SurfaceState(grid, np.zeros_like(grid.x))
        loads = SurfaceLoads.from_state(state, shape, p)
        with pytest.raises(ValueError):
            surface_work(loads, grid, np.zeros(grid.x.size + 1))


class TestContactFlux:
    def test_inverts_law_at_both_corners(self):
        p, _, _, resp = make_setup()
        for mh in (0.5, 1.0, 1.3333, 2.5):
            rate = contact_velocity(p, resp, mh, "left")
            val, _ = contact_flux(p, resp, rate, "left")
            assert val == pytest.approx(p.sigma * mh / math.hypot(1.0, mh), abs=1e-14)
        for mh in (-0.5, -1.0, -1.3333, -2.5):
            rate = contact_velocity(p, resp, mh, "right")
            val, _ = contact_flux(p, resp, rate, "right")
            assert val == pytest.approx(p.sigma * mh / math.hypot(1.0, mh), abs=1e-14)

    def test_slope_matches_finite_difference(self):
        p, _, _, resp = make_setup()
        h = 1e-6
        for side, rate in (("left", 0.07), ("right", -0.11)):
            _, dphi = contact_flux(p, resp, rate, side)
            up, _ = contact_flux(p, resp, rate + h, side)
            dn, _ = contact_flux(p, resp, rate - h, side)
            assert dphi == pytest.approx((up - dn) / (2.0 * h), rel=1e-6)

    def test_degenerate_angles_rejected(self):
        p, _, _, resp = make_setup()
        # stress beyond sigma - gamma_jump closes the angle entirely
        with pytest.raises(AssemblyError):
            contact_flux(p, resp, 1.0, "left")
        with pytest.raises(AssemblyError):
            contact_flux(p, resp, -1.0, "left")


class TestEnergyIdentity:
    """Semi-discrete energy balance of the coupled surface problem.

    For any trace w routed through the shared projection, the exact rate of
    the discrete energy along the transport flow balances the load
    functional up to dynamic-angle work at the corners plus the mismatch
    between the trace endpoints and the contact-point rates. When the trace
    endpoints agree with rates from the contact law, the balance reduces to
    dE/dt + D = 0 with D the contact dissipation.
    """

    def _state(self, grid, rng, amp=0.02):
        return SurfaceState(grid, smooth_eps(grid, rng, amp),
                            l=rng.uniform(-0.02, 0.02), r=rng.uniform(-0.02, 0.02))

    def _trace(self, grid, rng, end_l, end_r):
        raw = rng.normal() * np.cos(3.1 * grid.x / grid.ell)
        raw += 0.4 * rng.normal() * np.sin(7.3 * grid.x / grid.ell + rng.normal())
        w = grid.project_trace(raw)
        cap_r = (grid.x + grid.ell) / (2.0 * grid.ell)
        return w + (end_l - w[0]) * (1.0 - cap_r) + (end_r - w[-1]) * cap_r

    def test_balance_with_arbitrary_trace(self):
        p, shape, grid, resp = make_setup()
        for seed in (7, 21, 35):
            rng = np.random.default_rng(seed)
            state = self._state(grid, rng)
            rates = contact_rates(state, shape, p, resp)
            w = self._trace(grid, rng, rng.normal() * 0.3, rng.normal() * 0.3)
            v = transport_rate(state, w, shape, rates)
            de = energy_rate(state, shape, p, rates, v)
            lw = surface_work(SurfaceLoads.from_state(state, shape, p), grid, w)
            rhs = corner_balance(state, shape, p, rates, w)
            scale = max(1.0, abs(de), abs(lw))
            assert abs(de + lw - rhs) < 5e-12 * scale

    def test_balance_at_equilibrium(self):
        p, shape, grid, resp = make_setup()
        rng = np.random.default_rng(41)
        state = SurfaceState(grid, np.zeros_like(grid.x))
        rates = contact_rates(state, shape, p, resp)
        w = self._trace(grid, rng, 0.0, 0.0)
        v = transport_rate(state, w, shape, rates)
        de = energy_rate(state, shape, p, rates, v)
        lw = surface_work(SurfaceLoads.from_state(state, shape, p), grid, w)
        assert abs(de + lw) < 1e-12

    def test_compatible_trace_balances_dissipation(self):
        # trace endpoints carry exactly the contact-law rates: defect gone
        p, shape, grid, resp = make_setup()
        rng = np.random.default_rng(43)
        state = self._state(grid, rng)
        loads = SurfaceLoads.from_state(state, shape, p)
        ld = contact_velocity(p, resp, loads.mhat[0], "left")
        rd = contact_velocity(p, resp, loads.mhat[-1], "right")
        rates = ContactRates(ld, rd, loads.mhat[0], loads.mhat[-1])
        zx = state.slope(shape)
        w = self._trace(grid, rng, -ld * zx[0], -rd * zx[-1])
        v = transport_rate(state, w, shape, rates)
        de = energy_rate(state, shape, p, rates, v)
        lw = surface_work(loads, grid, w)
        dc = contact_dissipation(resp, ld, rd)
        scale = max(1.0, abs(de), abs(lw))
        assert dc > 0.0
        assert abs(de + dc + lw) < 5e-12 * scale

    def test_energy_rate_matches_finite_difference(self):
        p, shape, grid, resp = make_setup()
        rng = np.random.default_rng(47)
        state = self._state(grid, rng)
        rates = contact_rates(state, shape, p, resp)
        w = self._trace(grid, rng, 0.2, -0.1)
        v = transport_rate(state, w, shape, rates)
        de = energy_rate(state, shape, p, rates, v)

        def total(delta):
            moved = SurfaceState(grid, state.eps + delta * v,
                                 state.l + delta * rates.ldot,
                                 state.r + delta * rates.rdot)
            return energy(moved, shape, p).total

        h = 1e-3
        fd = (-total(2 * h) + 8 * total(h) - 8 * total(-h) + total(-2 * h)) / (12 * h)
        assert de == pytest.approx(fd, abs=5e-9)

    def test_mass_flux_is_trace_integral(self):
        # d/dt of the mass along the transport flow equals the net flux
        p, shape, grid, resp = make_setup()
        rng = np.random.default_rng(53)
        state = self._state(grid, rng)
        rates = contact_rates(state, shape, p, resp)
        w = self._trace(grid, rng, 0.15, 0.25)
        v = transport_rate(state, w, shape, rates)
        jdot = (rates.rdot - rates.ldot) / (2.0 * grid.ell)
        dm = jdot * grid.inner(state.height(shape)) + state.j1 * grid.inner(v)
        assert dm == pytest.approx(grid.inner(w), abs=1e-10)
