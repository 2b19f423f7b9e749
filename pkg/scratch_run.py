"""Trajectory energy-identity measurement: mode-2 perturbed run, residual
series at dt and dt/2, mass corrections, mismatch decay, monotonicity."""

import time

import numpy as np

from sessilesim import (
    LinearResponse,
    PhysicalParams,
    SurfaceGrid,
    SurfaceState,
    solve_equilibrium,
)
from sessilesim import dynamics
from sessilesim.mesh import build_mesh
from sessilesim.stokes import FlowSolver

p = PhysicalParams()
shape = solve_equilibrium(1.0, p)
resp = LinearResponse(drag=1.3)

n_grid = 128
n_mesh = 32
t_end = 0.3

grid = SurfaceGrid(n_grid, shape.ell)
amp = 0.02
eps = amp * np.sin(2.0 * np.pi * (grid.x + shape.ell) / (2.0 * shape.ell))
eps[0] = eps[-1] = 0.0
mesh = build_mesh(shape, n_mesh)
solver = FlowSolver(mesh, grid, shape, p, response=resp)

results = {}
for dt in (1e-3, 5e-4):
    initial = SurfaceState(grid, eps.copy())
    t0 = time.perf_counter()
    out = dynamics.run(solver, initial, dt, t_end)
    wall = time.perf_counter() - t0
    rows = out.rows
    t = np.array([r.t for r in rows])
    e = np.array([r.E for r in rows])
    d = np.array([r.D for r in rows])
    res = np.array([r.residual for r in rows])
    mm = np.array([r.trace_mismatch for r in rows])
    mc = np.array([r.mass_correction for r in rows])
    m = np.array([r.M for r in rows])
    interior = res[1:-1]
    print(f"== dt={dt:g}  steps={len(rows)-1}  wall={wall:.1f}s  "
          f"halvings={out.halvings}")
    print(f"   max residual {np.max(interior):.4e}   "
          f"median {np.median(interior):.4e}")
    print(f"   D range [{d.min():.3e}, {d.max():.3e}]  D>=0: {np.all(d >= 0)}")
    de = np.diff(e)
    print(f"   monotone: max dE step {de.max():.3e}  (violations "
          f"{np.sum(de > 1e-10)})")
    print(f"   mass drift rel {np.max(np.abs(m - m[0]))/m[0]:.3e}   "
          f"max corr {mc.max():.3e}  corr@end {mc[-1]:.3e}")
    print(f"   mismatch: t0 {mm[0]:.3e}  t=0.05 {mm[np.searchsorted(t, 0.05)]:.3e}  "
          f"end {mm[-1]:.3e}")
    k = min(8, len(interior))
    print(f"   residual head: {np.array2string(interior[:k], precision=3)}")
    idx = np.linspace(0, len(interior) - 1, 12).astype(int)
    print(f"   residual profile t={np.array2string(t[1:-1][idx], precision=3)}")
    print(f"                    r={np.array2string(interior[idx], precision=3)}")
    results[dt] = (t, res)

# pointwise shrink at matched interior times
t1, r1 = results[1e-3]
t2, r2 = results[5e-4]
# rows at dt/2 with even index align with dt rows
match = np.flatnonzero(np.isin(np.round(t2 / 5e-4).astype(int) % 2, [0]))
common = np.intersect1d(np.round(t1 / 5e-4).astype(int),
                        np.round(t2 / 5e-4).astype(int))
i1 = {int(round(tt / 5e-4)): i for i, tt in enumerate(t1)}
i2 = {int(round(tt / 5e-4)): i for i, tt in enumerate(t2)}
ratios, ts = [], []
for key in common:
    a, b = i1.get(int(key)), i2.get(int(key))
    if a is None or b is None:
        continue
    ra, rb = r1[a], r2[b]
    if np.isfinite(ra) and np.isfinite(rb) and rb > 0:
        ratios.append(ra / rb)
        ts.append(t1[a])
ratios = np.array(ratios)
ts = np.array(ts)
print("== pointwise residual ratio dt/(dt/2):")
idx = np.linspace(0, len(ratios) - 1, 14).astype(int)
print(f"   t     {np.array2string(ts[idx], precision=3)}")
print(f"   ratio {np.array2string(ratios[idx], precision=3)}")
print(f"   max-residual shrink: "
      f"{np.nanmax(r1[1:-1]) / np.nanmax(r2[1:-1]):.3f}")
