"""Decompose the semi-discrete energy defect of the coupled solve."""

import math

import numpy as np

from sessilesim import (
    LinearResponse,
    PhysicalParams,
    SurfaceGrid,
    SurfaceLoads,
    SurfaceState,
    contact_dissipation,
    contact_flux,
    contact_rates,
    solve_equilibrium,
    surface_work,
    transport_rate,
)
from sessilesim.mesh import build_mesh
from sessilesim.stokes import FlowSolver


def energy_rate(state, shape, p, rates, v):
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


def main(n_mesh, n_grid=256, amp=0.02, drag=1.3):
    p = PhysicalParams()
    shape = solve_equilibrium(1.0, p)
    grid = SurfaceGrid(n_grid, shape.ell)
    resp = LinearResponse(drag=drag)
    eps = amp * np.sin(2.0 * np.pi * (grid.x + grid.ell) / (2.0 * grid.ell))
    eps[0] = eps[-1] = 0.0
    state = SurfaceState(grid, eps)

    mesh = build_mesh(shape, n_mesh)
    solver = FlowSolver(mesh, grid, shape, p, response=resp)
    flow = solver.solve(state)

    rates = contact_rates(state, shape, p, resp)
    v = transport_rate(state, flow.trace, shape, rates)
    de = energy_rate(state, shape, p, rates, v)
    diss = flow.dissipation
    dc = contact_dissipation(resp, rates.ldot, rates.rdot)
    d_total = diss + dc
    defect = de + d_total

    # exact identity check: dE + diss = (sig*s_R - gam)*rdot - (sig*s_L - gam)*ldot
    #                                   - mh_R V_R Phi_R(V_R) + mh_L V_L Phi_L(V_L)
    zx = state.slope(shape)
    j1 = state.j1
    mh = zx / j1
    s_l = math.hypot(1.0, mh[0])
    s_r = math.hypot(1.0, mh[-1])
    vl, vr = flow.corner_left, flow.corner_right
    phi_l, _ = contact_flux(p, resp, vl, "left")
    phi_r, _ = contact_flux(p, resp, vr, "right")
    rhs = (
        (p.sigma * s_r - p.gamma_jump) * rates.rdot
        - (p.sigma * s_l - p.gamma_jump) * rates.ldot
        - mh[-1] * vr * phi_r
        + mh[0] * vl * phi_l
    )
    identity_residual = de + diss - rhs

    # per-corner defect decomposition (law at spectral slope for the W terms)
    from sessilesim.dynamics import contact_velocity
    ld_s = contact_velocity(p, resp, mh[0] * j1, "left")
    rd_s = contact_velocity(p, resp, mh[-1] * j1, "right")
    flux_l = p.sigma * mh[0] / s_l
    flux_r = p.sigma * mh[-1] / s_r
    # delta_R = mh_R [rdot*Phi_R(rd_s) - V_R Phi_R(V_R)] + rdot(W(rdot)-W(rd_s))
    dR = mh[-1] * (rates.rdot * flux_r - vr * phi_r) + rates.rdot * (
        resp.force(rates.rdot) - resp.force(rd_s))
    dL = -mh[0] * (rates.ldot * flux_l - vl * phi_l) - rates.ldot * (
        resp.force(rates.ldot) - resp.force(ld_s))

    print(f"n_mesh={n_mesh:4d}  picard={flow.picard_iters}")
    print(f"  rates (law, stencil): ldot={rates.ldot:+.6e} rdot={rates.rdot:+.6e}")
    print(f"  rates (law, spectral): ld_s={ld_s:+.6e} rd_s={rd_s:+.6e}")
    print(f"  corner V:            V_L ={vl:+.6e} V_R ={vr:+.6e}")
    print(f"  mismatch rate-V:     L={rates.ldot - vl:+.3e} R={rates.rdot - vr:+.3e}")
    print(f"  dE={de:+.6e}  diss={diss:.6e}  dc={dc:.6e}  D={d_total:.6e}")
    print(f"  defect dE+D = {defect:+.6e}   rel = {abs(defect) / d_total:.4f}")
    print(f"  identity residual (should be ~0): {identity_residual:+.3e}")
    print(f"  corner defect decomposition: dL={dL:+.6e} dR={dR:+.6e} "
          f"sum={dL + dR:+.6e}")
    print()


if __name__ == "__main__":
    for n in (16, 32, 64):
        main(n)
