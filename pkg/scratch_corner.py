"""Open-loop corner response: impose the law-consistent corner flux and
measure the corner velocity functional against the law rate, across mesh
resolution and trace cutoff."""

import numpy as np

from sessilesim import (
    LinearResponse,
    PhysicalParams,
    SurfaceGrid,
    SurfaceLoads,
    SurfaceState,
    contact_flux,
    solve_equilibrium,
    surface_load_covector,
)
from sessilesim.dynamics import contact_rates
from sessilesim.mesh import build_mesh
from sessilesim.stokes import FlowSolver, _ReducedFactor

p = PhysicalParams()
shape = solve_equilibrium(1.0, p)
grid = SurfaceGrid(256, shape.ell)
amp = 0.02
eps = amp * np.sin(2.0 * np.pi * (grid.x + shape.ell) / (2.0 * shape.ell))
eps[0] = eps[-1] = 0.0
state = SurfaceState(grid, eps)
resp = LinearResponse(drag=1.3)
rates = contact_rates(state, shape, p, resp)
phiL, _ = contact_flux(p, resp, rates.ldot, "left")
phiR, _ = contact_flux(p, resp, rates.rdot, "right")
print(f"law rates: ldot={rates.ldot:+.6e} rdot={rates.rdot:+.6e}")
print(f"law corner flux: phiL={phiL:+.6e} phiR={phiR:+.6e}")

loads = SurfaceLoads.from_state(state, shape, p)
zx, j1 = loads.slope, loads.j1

for n_mesh in (16, 32, 64, 128):
    mesh = build_mesh(shape, n_mesh)
    solver = FlowSolver(mesh, grid, shape, p, response=resp)
    coeffs = solver._coefficients(state)
    for K in (16, 32, 64, 128, 256):
        proj = grid.trace_projection_matrix(K)
        solver._proj_w = proj.T @ grid.w
        g_l = solver._surface_force(proj[0], zx, j1)
        g_r = solver._surface_force(proj[-1], zx, j1)
        k, b = solver._assemble_bulk(p.mu, coeffs)
        k = k + p.beta * solver._slip_unit
        b = b.tolil()
        b[solver._c_star, :] = -solver._flux_row(zx, j1)
        b = b.tocsr()
        fixed = 2 * solver._bottom_nodes + 1
        vals = np.zeros(fixed.size)
        cov = surface_load_covector(loads, grid, keep=K,
                                    corner_flux=(phiL, phiR))
        f = np.zeros(solver.ndof_u + solver.n_press)
        f[:solver.ndof_u] = solver._surface_force(cov, zx, j1)
        s = solver._saddle(k, b)
        x, res = _ReducedFactor(s, fixed, vals).solve(f)
        u = x[:solver.ndof_u]
        vL = -(g_l @ u) / zx[0]
        vR = -(g_r @ u) / zx[-1]
        vLr = u[2 * mesh.corner_left]
        vRr = u[2 * mesh.corner_right]
        print(f"n_mesh={n_mesh:4d} K={K:4d}  "
              f"vL={vL:+.6e} ({vL - rates.ldot:+.2e})  "
              f"vR={vR:+.6e} ({vR - rates.rdot:+.2e})  "
              f"raw L={vLr:+.6e} R={vRr:+.6e}")
    print()
