"""Decompose the one-step energy defect at the frozen mode-2 state:
raw-update defect vs projected-update defect, for the Picard/Robin corner
closure and for the open-loop law-flux closure."""

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
from sessilesim import diagnostics, dynamics
from sessilesim.dynamics import contact_rates, transport_rate, _project_state
from sessilesim.mesh import build_mesh
from sessilesim.stokes import FlowSolver, _ReducedFactor
import scipy.sparse as sparse

p = PhysicalParams()
shape = solve_equilibrium(1.0, p)
grid = SurfaceGrid(128, shape.ell)
amp = 0.02
eps = amp * np.sin(2.0 * np.pi * (grid.x + shape.ell) / (2.0 * shape.ell))
eps[0] = eps[-1] = 0.0
state = SurfaceState(grid, eps)
resp = LinearResponse(drag=1.3)
mesh = build_mesh(shape, 32)
solver = FlowSolver(mesh, grid, shape, p, response=resp)

rates = contact_rates(state, shape, p, resp)
e0 = diagnostics.energy(state, shape, p).total
m0 = diagnostics.mass(state, shape)

def defect_table(label, flow_trace, diss, vbar):
    d = diagnostics.dissipation(diss, resp, rates.ldot, rates.rdot)
    v = transport_rate(state, flow_trace, shape, rates)
    print(f"-- {label}: V=({vbar[0]:+.4e},{vbar[1]:+.4e})  "
          f"gapL={rates.ldot-vbar[0]:+.3e} gapR={rates.rdot-vbar[1]:+.3e}  "
          f"D={d:.6e}")
    for dt in (1e-3, 5e-4, 2.5e-4, 1.25e-4):
        raw = SurfaceState(grid, state.eps + dt * v,
                           state.l + dt * rates.ldot,
                           state.r + dt * rates.rdot)
        e_raw = diagnostics.energy(raw, shape, p).total
        proj, corr = _project_state(raw, shape, m0)
        e_proj = diagnostics.energy(proj, shape, p).total
        r_raw = (e_raw - e0) / dt + d
        r_proj = (e_proj - e0) / dt + d
        pin_only = SurfaceState(
            grid,
            raw.eps - raw.eps[0] * (1 - (grid.x + grid.ell) / (2 * grid.ell))
            - raw.eps[-1] * (grid.x + grid.ell) / (2 * grid.ell),
            raw.l, raw.r)
        e_pin = diagnostics.energy(pin_only, shape, p).total
        print(f"   dt={dt:9.2e}  raw {r_raw:+.4e}  +pin "
              f"{(e_pin - e0)/dt + d:+.4e}  +renorm {r_proj:+.4e}  "
              f"(rel {r_proj/d:+.3f})  corr/dt {corr/dt:.3e}")

# closure 1: production Robin/Picard solve
flow = solver.solve(state)
defect_table("robin closure", flow.trace, flow.dissipation,
             (flow.corner_left, flow.corner_right))

# closure 2: open-loop law flux
loads = SurfaceLoads.from_state(state, shape, p)
zx, j1 = loads.slope, loads.j1
phiL, _ = contact_flux(p, resp, rates.ldot, "left")
phiR, _ = contact_flux(p, resp, rates.rdot, "right")
proj_m = grid.trace_projection_matrix()
g_l, g_r = proj_m[0], proj_m[-1]
coeffs = solver._coefficients(state)
k, b = solver._assemble_bulk(p.mu, coeffs)
k = k + p.beta * solver._slip_unit
cov = surface_load_covector(loads, grid, corner_flux=(phiL, phiR))
nfree = k.shape[0] + b.shape[0]
f = np.zeros(nfree)
f[:k.shape[0]] = solver._surface_force(cov, zx, j1)
s = solver._saddle(k, b)
fixed = 2 * solver._bottom_nodes + 1
x, _ = _ReducedFactor(s, fixed, np.zeros(fixed.size)).solve(f)
u = x[:k.shape[0]]
u1s = solver._surf_sampler @ u[0::2]
u2s = solver._surf_sampler @ u[1::2]
trace_raw = j1 * u2s - zx * u1s
trace = grid.project_trace(trace_raw)
vL = -(g_l @ trace_raw) / zx[0] if False else -(trace[0]) / zx[0]
vR = -(trace[-1]) / zx[-1]
defect_table("open-loop law flux", trace, float(u @ (k @ u)), (vL, vR))
