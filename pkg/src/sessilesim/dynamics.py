"""Time advance of the coupled surface-flow-contact system.

The flow is quasi-stationary: it is solved fresh from the instantaneous
geometry, the contact points move by the dynamic contact law evaluated at
the current endpoint slopes, and the surface perturbation is transported by
the projected flow trace plus the footprint advection. This module owns the
surface state container, the contact law, the endpoint slope extraction,
and the transport rate; the flow solve itself lives in stokes.
"""

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import diagnostics, geometry
from .geometry import DomainError, SurfaceGrid
from .params import ContactResponse, PhysicalParams
from .stokes import AssemblyError, SingularSystemError


class StepError(RuntimeError):
    """Raised when a time step cannot be completed at the current dt."""


@dataclass
class SurfaceState:
    """Surface perturbation samples and contact-point offsets at one instant.

    eps lives on the shared surface grid and vanishes at both endpoints;
    l and r are the signed displacements of the left and right contact
    points from their equilibrium positions -ell and +ell.
    """

    grid: SurfaceGrid
    eps: np.ndarray
    l: float = 0.0
    r: float = 0.0

    def __post_init__(self):
        self.eps = np.array(self.eps, dtype=float)
        if self.eps.shape != self.grid.x.shape:
            raise ValueError("eps must be sampled on the surface grid")
        # validates that the contact points have not crossed
        geometry.width_dilation(self.grid.ell, self.l, self.r)

    @property
    def j1(self) -> float:
        return geometry.width_dilation(self.grid.ell, self.l, self.r)

    @property
    def k1(self) -> float:
        return geometry.dilation_defect(self.grid.ell, self.l, self.r)

    def height(self, shape):
        return shape.height(self.grid.x) + self.eps

    def slope(self, shape):
        """Spectral derivative of the full surface height on the grid."""
        return shape.slope(self.grid.x) + self.grid.D @ self.eps

    def copy(self) -> "SurfaceState":
        return SurfaceState(self.grid, self.eps.copy(), self.l, self.r)


@dataclass(frozen=True)
class ContactRates:
    """Contact-point speeds and the stretched slopes that produced them."""

    ldot: float
    rdot: float
    mhat_left: float
    mhat_right: float


def contact_velocity(p: PhysicalParams, response: ContactResponse,
                     slope_at_contact: float, side: str) -> float:
    """Contact-point speed from the dynamic contact law.

    Parameters
    ----------
    slope_at_contact : float
        Stretched surface slope K1 * d1(zeta) at the contact point.
    side : {"left", "right"}
        Which contact point; the two laws mirror each other.

    Returns
    -------
    float
        Speed of the contact point. A flatter-than-equilibrium angle makes
        the wetted interval retract (left point moves right and vice versa);
        a steeper angle makes it advance.
    """
    s = float(slope_at_contact)
    if not math.isfinite(s):
        raise ValueError(f"slope at contact must be finite, got {s!r}")
    stress = p.sigma / math.hypot(1.0, s) - p.gamma_jump
    if side == "left":
        return float(response.velocity(stress))
    if side == "right":
        return float(response.velocity(-stress))
    raise ValueError(f"side must be 'left' or 'right', got {side!r}")


def one_sided_slope(x, values, side: str) -> float:
    """Boundary derivative from the three nodes nearest one endpoint."""
    if side == "left":
        i0, i1, i2 = 0, 1, 2
    elif side == "right":
        i0, i1, i2 = -1, -2, -3
    else:
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    x0, x1, x2 = x[i0], x[i1], x[i2]
    v0, v1, v2 = values[i0], values[i1], values[i2]
    return float(
        v0 * (2.0 * x0 - x1 - x2) / ((x0 - x1) * (x0 - x2))
        + v1 * (x0 - x2) / ((x1 - x0) * (x1 - x2))
        + v2 * (x0 - x1) / ((x2 - x0) * (x2 - x1))
    )


def contact_rates(state: SurfaceState, shape, p: PhysicalParams,
                  response: ContactResponse) -> ContactRates:
    """Evaluate the contact law at both endpoints of the discrete state.

    The endpoint slope of the perturbation comes from a one-sided 3-point
    stencil on the clustered grid; the equilibrium part is analytic. The
    law sees the K1-stretched slope of the full surface.
    """
    k1 = state.k1
    ex_l = one_sided_slope(state.grid.x, state.eps, "left")
    ex_r = one_sided_slope(state.grid.x, state.eps, "right")
    mhat_l = (1.0 + k1) * (shape.slope(-state.grid.ell) + ex_l)
    mhat_r = (1.0 + k1) * (shape.slope(state.grid.ell) + ex_r)
    ldot = contact_velocity(p, response, mhat_l, "left")
    rdot = contact_velocity(p, response, mhat_r, "right")
    return ContactRates(ldot, rdot, mhat_l, mhat_r)


def transport_rate(state: SurfaceState, traces, shape,
                   rates: ContactRates) -> np.ndarray:
    """Pointwise rate of the surface perturbation on the grid.

    traces must be the projected normal-flux trace of the solved flow on
    the surface grid (see stokes); the advective part carries the profile
    with the affine footprint motion. Endpoint values are generally a
    stencil-tolerance away from zero; the step re-pins them.
    """
    traces = np.asarray(traces, dtype=float)
    if traces.shape != state.grid.x.shape:
        raise ValueError("traces must be sampled on the surface grid")
    zx = state.slope(shape)
    affine, _, _ = geometry.dilation_fields(
        state.grid.x, state.grid.ell, state.l, state.r, rates.ldot, rates.rdot
    )
    return (affine * zx + traces) / state.j1


@dataclass
class SimState:
    """Evolving unknowns of one run plus the most recent solve.

    flow holds the last flow the stepper computed, which after a step is
    the midpoint solve; its corner speeds are the warm start for the next
    solve. history keeps a bounded ring of (t, l, r, ldot, rdot).
    """

    surface: SurfaceState
    flow: object = None
    t: float = 0.0
    step_index: int = 0
    history: deque = field(default_factory=lambda: deque(maxlen=256))


@dataclass(frozen=True)
class StepReport:
    """What one accepted step measured at its starting state."""

    flow: object
    rates: ContactRates
    mass_correction: float


def _project_state(surface: SurfaceState, shape, mass_target: float):
    """Re-pin eps at the endpoints and restore the mass multiplicatively.

    The affine endpoint subtraction absorbs the transport's corner drift;
    the multiplicative height rescale then restores the configured mass
    exactly. Returns the projected state and the rescale magnitude |c-1|.
    """
    grid = surface.grid
    cap = (grid.x + grid.ell) / (2.0 * grid.ell)
    eps = surface.eps - surface.eps[0] * (1.0 - cap) - surface.eps[-1] * cap
    pinned = SurfaceState(grid, eps, surface.l, surface.r)
    m = diagnostics.mass(pinned, shape)
    if not (math.isfinite(m) and m > 0.0):
        raise StepError(f"mass lost definiteness: {m!r}")
    c = mass_target / m
    zeta = pinned.height(shape)
    out = SurfaceState(grid, eps + (c - 1.0) * zeta, surface.l, surface.r)
    return out, abs(c - 1.0)


def _check_valid(surface: SurfaceState, shape) -> None:
    zeta = surface.height(shape)
    if not np.all(np.isfinite(zeta)):
        raise StepError("surface height lost finiteness")
    if np.any(zeta[1:-1] <= 0.0):
        raise StepError("surface height touched the substrate")


def step(sim: SimState, dt: float, solver, mass_target: float) -> tuple:
    """Advance the coupled system by one explicit midpoint step.

    Solves the flow at the current geometry, moves the contact points by
    the contact law at the current stencil slopes, transports the surface
    by the projected trace, re-solves everything at the half step, and
    applies the corrector, re-pinning the endpoints and renormalizing the
    mass afterward. Returns (new SimState, StepReport); the report holds
    the starting-state flow and rates for diagnostics. Geometry or solver
    degeneracies surface as StepError so a driver can shrink dt.
    """
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt!r}")
    shape = solver.shape
    p = solver.p
    response = solver.response
    surface = sim.surface
    warm = ((sim.flow.corner_left, sim.flow.corner_right)
            if sim.flow is not None else (0.0, 0.0))
    try:
        flow0 = solver.solve(surface, picard_init=warm)
        rates0 = contact_rates(surface, shape, p, response)
        v0 = transport_rate(surface, flow0.trace, shape, rates0)

        half_raw = SurfaceState(
            surface.grid, surface.eps + 0.5 * dt * v0,
            surface.l + 0.5 * dt * rates0.ldot,
            surface.r + 0.5 * dt * rates0.rdot)
        half, _ = _project_state(half_raw, shape, mass_target)
        _check_valid(half, shape)

        flow_h = solver.solve(
            half, picard_init=(flow0.corner_left, flow0.corner_right))
        rates_h = contact_rates(half, shape, p, response)
        v_h = transport_rate(half, flow_h.trace, shape, rates_h)

        new_raw = SurfaceState(
            surface.grid, surface.eps + dt * v_h,
            surface.l + dt * rates_h.ldot,
            surface.r + dt * rates_h.rdot)
        new_surface, corr = _project_state(new_raw, shape, mass_target)
        _check_valid(new_surface, shape)
    except (DomainError, AssemblyError, SingularSystemError) as exc:
        raise StepError(str(exc)) from exc

    new_sim = SimState(
        surface=new_surface,
        flow=flow_h,
        t=sim.t + dt,
        step_index=sim.step_index + 1,
        history=sim.history,
    )
    new_sim.history.append(
        (new_sim.t, new_surface.l, new_surface.r, rates_h.ldot, rates_h.rdot))
    return new_sim, StepReport(flow=flow0, rates=rates0, mass_correction=corr)


@dataclass
class RunResult:
    """Trajectory artifacts of one run."""

    rows: list
    final: SimState
    halvings: int
    rejections: int


def _row(sim: SimState, flow, rates, shape, p, response,
         mass_correction: float) -> diagnostics.DiagnosticsRow:
    surface = sim.surface
    bd = diagnostics.energy(surface, shape, p)
    d = diagnostics.dissipation(
        flow.dissipation, response, rates.ldot, rates.rdot)
    x1, x2 = diagnostics.center_of_mass(surface, shape)
    mismatch = max(abs(rates.ldot - flow.corner_left),
                   abs(rates.rdot - flow.corner_right))
    return diagnostics.DiagnosticsRow(
        t=sim.t,
        E=bd.total,
        dE=bd.excess,
        D=d,
        residual=float("nan"),
        M=diagnostics.mass(surface, shape),
        L=-surface.grid.ell + surface.l,
        R=surface.grid.ell + surface.r,
        theta_L=math.atan(rates.mhat_left),
        theta_R=math.atan(-rates.mhat_right),
        X1=x1,
        X2=x2,
        trace_mismatch=mismatch,
        picard_iters=flow.picard_iters,
        mass_correction=mass_correction,
    )


def run(solver, initial: SurfaceState, dt: float, t_end: float,
        max_halvings: int = 8, monotone_tol: float = 1e-10,
        on_row=None) -> RunResult:
    """Drive steps from the initial surface to t_end.

    Each step is attempted at the current dt; a StepError or an energy
    increase beyond monotone_tol rejects the attempt and halves dt, up to
    max_halvings over the run. One diagnostics row is emitted per accepted
    state, including the final one; centered energy-identity residuals
    are filled into the rows afterward. on_row, when given, is called with
    each row as it is produced.
    """
    shape, p, response = solver.shape, solver.p, solver.response
    mass_target = diagnostics.mass(initial, shape)
    sim = SimState(surface=initial)
    rows = []
    halvings = 0
    rejections = 0
    correction = 0.0

    def emit(row):
        rows.append(row)
        if on_row is not None:
            on_row(row)

    while sim.t < t_end - 1e-12 * max(1.0, t_end):
        dt_eff = min(dt, t_end - sim.t)
        while True:
            try:
                new_sim, report = step(sim, dt_eff, solver, mass_target)
            except StepError as exc:
                if halvings >= max_halvings:
                    raise StepError(
                        f"dt floor reached after {max_halvings} halvings: "
                        f"{exc}") from exc
                dt = dt / 2.0
                dt_eff = min(dt, t_end - sim.t)
                halvings += 1
                rejections += 1
                continue
            e_new = diagnostics.energy(new_sim.surface, shape, p).total
            row = _row(sim, report.flow, report.rates, shape, p, response,
                       correction)
            if e_new > row.E + monotone_tol:
                if halvings >= max_halvings:
                    raise StepError(
                        f"energy increased by {e_new - row.E:.3e} at the "
                        f"dt floor")
                dt = dt / 2.0
                dt_eff = min(dt, t_end - sim.t)
                halvings += 1
                rejections += 1
                continue
            break
        emit(row)
        correction = report.mass_correction
        sim = new_sim

    final_flow = solver.solve(
        sim.surface,
        picard_init=((sim.flow.corner_left, sim.flow.corner_right)
                     if sim.flow is not None else (0.0, 0.0)))
    final_rates = contact_rates(sim.surface, shape, p, response)
    emit(_row(sim, final_flow, final_rates, shape, p, response, correction))

    t = np.array([r.t for r in rows])
    e = np.array([r.E for r in rows])
    d = np.array([r.D for r in rows])
    if t.size >= 3:
        res = diagnostics.energy_identity_residual(t, e, d)
        for i, r in enumerate(rows[1:-1]):
            r.residual = float(res[i])
    return RunResult(rows=rows, final=sim, halvings=halvings,
                     rejections=rejections)
