"""Run audits: energy, dissipation, mass, decay fits, and drift.

Everything here is evaluated in the fixed reference coordinates, with the
footprint dilation J1 weighting the horizontal measure and K1 stretching
slopes, so the reported quantities equal their physical-domain values.
"""

import math
from dataclasses import dataclass

import numpy as np

from .params import ContactResponse, PhysicalParams


class FitError(RuntimeError):
    """Raised when a regression has no usable data."""


TIMESERIES_FIELDS = (
    "t", "E", "dE", "D", "residual", "M", "L", "R", "theta_L", "theta_R",
    "X1", "X2", "trace_mismatch", "picard_iters", "mass_correction",
)


@dataclass
class DiagnosticsRow:
    """One audited instant of a run, matching the timeseries.csv columns.

    residual is the centered energy-identity defect and needs both
    neighbors, so it is filled in after the run; boundary rows keep nan.
    mass_correction is the renormalization magnitude |c - 1| applied by
    the step that produced this state (zero for the initial row).
    """

    t: float
    E: float
    dE: float
    D: float
    residual: float
    M: float
    L: float
    R: float
    theta_L: float
    theta_R: float
    X1: float
    X2: float
    trace_mismatch: float
    picard_iters: int
    mass_correction: float

    def astuple(self):
        return tuple(getattr(self, f) for f in TIMESERIES_FIELDS)


@dataclass(frozen=True)
class EnergyBreakdown:
    """Total mechanical energy and its three physical parts.

    excess is measured against the equilibrium value computed with the
    same grid and quadrature, so it vanishes identically at equilibrium
    instead of only to quadrature tolerance.
    """

    gravity: float
    surface: float
    wetting: float
    total: float
    excess: float


def energy(state, shape, p: PhysicalParams) -> EnergyBreakdown:
    """Gravitational + capillary + wetting energy of a surface state.

    The wetting term pays -gamma_jump per unit wetted length, which keeps
    the total positive: E >= (sigma - gamma_jump) * width > 0.
    """
    grid = state.grid
    j1 = state.j1
    zeta = state.height(shape)
    mhat = state.slope(shape) / j1
    grav = 0.5 * p.g * j1 * grid.inner(zeta, zeta)
    surf = p.sigma * j1 * grid.inner(np.sqrt(1.0 + mhat * mhat))
    wet = -p.gamma_jump * (2.0 * grid.ell + state.r - state.l)

    z0 = shape.height(grid.x)
    z0x = shape.slope(grid.x)
    e_eq = (
        0.5 * p.g * grid.inner(z0, z0)
        + p.sigma * grid.inner(np.sqrt(1.0 + z0x * z0x))
        - p.gamma_jump * 2.0 * grid.ell
    )
    total = grav + surf + wet
    return EnergyBreakdown(grav, surf, wet, total, total - e_eq)


def mass(state, shape) -> float:
    """Transformed fluid mass: the J1-weighted area under the surface."""
    return state.j1 * state.grid.inner(state.height(shape))


def center_of_mass(state, shape):
    """Center of mass (X1, X2) of the region below the surface."""
    grid = state.grid
    j1 = state.j1
    zeta = state.height(shape)
    m = j1 * grid.inner(zeta)
    z1 = j1 * grid.x + 0.5 * (state.r + state.l)
    x1 = j1 * grid.inner(z1, zeta) / m
    x2 = 0.5 * j1 * grid.inner(zeta, zeta) / m
    return x1, x2


def contact_dissipation(response: ContactResponse, ldot: float, rdot: float) -> float:
    """Power spent moving the contact points: W(ldot) ldot + W(rdot) rdot."""
    return float(response.force(ldot) * ldot + response.force(rdot) * rdot)


def dissipation(flow_power: float, response: ContactResponse,
                ldot: float, rdot: float) -> float:
    """Total dissipation rate: bulk viscous + slip power plus contact power.

    flow_power is the quadratic form of the solved flow (see stokes); it is
    nonnegative by construction, and the contact part is nonnegative because
    the response law is odd and increasing.
    """
    return float(flow_power) + contact_dissipation(response, ldot, rdot)


def energy_identity_residual(t, e, d, floor: float = 1e-12) -> np.ndarray:
    """Normalized defect of dE/dt + D = 0 along a sampled trajectory.

    Central differences for dE/dt at interior samples, paired with the
    dissipation at the same sample; normalized by the largest dissipation
    seen (or floor, when the run is essentially stationary). Needs at
    least 3 rows.
    """
    t = np.asarray(t, dtype=float)
    e = np.asarray(e, dtype=float)
    d = np.asarray(d, dtype=float)
    if t.size < 3:
        raise ValueError("residual needs at least 3 samples")
    dedt = (e[2:] - e[:-2]) / (t[2:] - t[:-2])
    scale = max(float(np.max(d)), floor)
    return np.abs(dedt + d[1:-1]) / scale


@dataclass(frozen=True)
class DecayFit:
    rate: float
    r_squared: float
    n_used: int


def fit_decay_rate(t, values, drop_fraction: float = 0.1,
                   floor: float = 1e-300) -> DecayFit:
    """Exponential decay rate of a positive timeseries.

    Drops the leading transient, fits log(max(values, floor)) against time
    by least squares, and returns the decay rate (positive for decaying
    data) with the fit R^2.
    """
    t = np.asarray(t, dtype=float)
    v = np.asarray(values, dtype=float)
    if t.shape != v.shape or t.size < 4:
        raise ValueError("need matching time/value arrays with >= 4 samples")
    start = int(math.floor(drop_fraction * t.size))
    t, v = t[start:], v[start:]
    keep = v > 0.0
    if not np.any(keep):
        raise FitError("decay fit needs positive values somewhere in the tail")
    y = np.log(np.maximum(v, floor))
    a = np.vstack([t, np.ones_like(t)]).T
    coef, *_ = np.linalg.lstsq(a, y, rcond=None)
    fitted = a @ coef
    ss_res = float(np.sum((y - fitted) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0.0 else 1.0
    return DecayFit(rate=-float(coef[0]), r_squared=r2, n_used=int(t.size))


def surface_h1_proxy(state, shape) -> float:
    """Decay metric companion to the excess energy: |d1 eps|^2 mass + k1^2."""
    ex = state.grid.D @ state.eps
    return float(state.grid.inner(ex, ex) + state.k1 ** 2)


def contact_slope_identity(state, shape, p: PhysicalParams,
                           response: ContactResponse, rates):
    """Endpoint perturbation slopes implied by the contact law.

    Inverts the law at the current rates: the dynamic angle determines the
    stretched slope at each corner, hence the perturbation slope once the
    equilibrium part is subtracted. Comparing against the spectral
    derivative of eps measures the stencil consistency of the rates.
    """
    j1 = state.j1
    wl = float(response.force(rates.ldot))
    wr = float(response.force(rates.rdot))
    young_l = p.gamma_jump + wl
    young_r = p.gamma_jump - wr
    if min(young_l, young_r) <= 0.0 or max(young_l, young_r) >= p.sigma:
        raise ValueError("contact rates imply a degenerate dynamic angle")
    mhat_l = math.sqrt(p.sigma ** 2 / young_l ** 2 - 1.0)
    mhat_r = -math.sqrt(p.sigma ** 2 / young_r ** 2 - 1.0)
    left = j1 * mhat_l - shape.slope(-state.grid.ell)
    right = j1 * mhat_r - shape.slope(state.grid.ell)
    return left, right
