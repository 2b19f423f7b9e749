"""Equilibrium droplet shape.

The static profile is a symmetric concave graph zeta0 on [-ell, ell]
satisfying the capillary balance

    sigma * curvature(zeta0) = g * zeta0 - P0,

with zeta0(+-ell) = 0 and the contact slope fixed by the wetting balance at
the contact points. Parametrizing the left half by the surface inclination
psi (0 at the apex, psi0 at contact) turns the balance into closed-form
height and one scalar quadrature for the horizontal coordinate, so the whole
solve reduces to a root find in the half-width ell.

For flat, heavy drops the half-width approaches its supremum and the naive
quantities cancel badly, so internally the root find runs in the variable
tau = sqrt(1 - (ell/ell_max)^2), which measures the distance to the puddle
limit; tau -> 1 is a small drop, tau -> 0 a wide pancake. All discriminants
are evaluated in the cancellation-free form (P0 tau)^2 + 4 g sigma sin^2(psi/2).
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, interpolate, optimize

from . import chebgrid
from .params import PhysicalParams


def equilibrium_pressure(mass: float, ell: float, p: PhysicalParams) -> float:
    """Reference pressure P0 implied by mass, half-width, and contact slope."""
    return (mass * p.g + 2.0 * math.sqrt(p.sigma**2 - p.gamma_jump**2)) / (2.0 * ell)


def max_half_width(mass: float, p: PhysicalParams) -> float:
    """Strict upper bound for the half-width; the width equation diverges here."""
    q = mass * p.g + 2.0 * math.sqrt(p.sigma**2 - p.gamma_jump**2)
    return q / math.sqrt(8.0 * p.g * (p.sigma - p.gamma_jump))


def _disc(psi, p0, tau, p):
    # P0^2 - 2 g (sigma cos(psi) - gamma_jump), free of cancellation
    return (p0 * tau) ** 2 + 4.0 * p.g * p.sigma * np.sin(0.5 * psi) ** 2


def _height_of_psi(psi, p0, tau, p):
    return (p0 - np.sqrt(_disc(psi, p0, tau, p))) / p.g


def _arc_integrand(psi, p0, tau, p):
    # d(horizontal coordinate)/d(inclination) on the left half
    return p.sigma * np.cos(psi) / np.sqrt(_disc(psi, p0, tau, p))


def _residual_of_tau(tau: float, mass: float, p: PhysicalParams) -> float:
    ell_cap = max_half_width(mass, p)
    ell = ell_cap * math.sqrt((1.0 - tau) * (1.0 + tau))
    p0 = equilibrium_pressure(mass, ell, p)
    with warnings.catch_warnings():
        # near the puddle limit the integrand spikes at psi = 0; only the
        # sign matters out there, so roundoff reports are unhelpful
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, _ = integrate.quad(
            _arc_integrand, 0.0, p.slope_angle, args=(p0, tau, p),
            epsabs=1e-13, epsrel=1e-13, limit=500,
        )
    return val / ell - 1.0


def width_residual(ell: float, mass: float, p: PhysicalParams) -> float:
    """Signed defect of the width equation, increasing in ell.

    Zero exactly when the profile parametrized by inclination spans the
    half-width ell. Negative as ell -> 0, diverges to +inf at max_half_width.
    """
    ell_cap = max_half_width(mass, p)
    if not 0.0 < ell < ell_cap:
        raise ValueError(f"ell must lie in (0, {ell_cap}), got {ell!r}")
    rho = ell / ell_cap
    tau = math.sqrt((1.0 - rho) * (1.0 + rho))
    return _residual_of_tau(tau, mass, p)


def solve_half_width(mass: float, p: PhysicalParams) -> float:
    """Half-width of the equilibrium drop of the given mass."""
    if not (math.isfinite(mass) and mass > 0.0):
        raise ValueError(f"mass must be positive, got {mass!r}")
    ell_cap = max_half_width(mass, p)

    # the residual decreases in tau: small tau is the wide pancake side
    f = lambda s: _residual_of_tau(math.exp(s), mass, p)
    s_lo, s_hi = math.log(1e-120), math.log1p(-1e-12)
    if f(s_lo) < 0.0:
        raise RuntimeError("width equation has no root in the supported range")
    s_root = optimize.brentq(f, s_lo, s_hi, xtol=1e-14, rtol=8.9e-16, maxiter=300)
    tau = math.exp(s_root)
    ell = ell_cap * math.sqrt((1.0 - tau) * (1.0 + tau))

    if tau > 0.7:
        # small-drop side: ell is poorly conditioned in the tau chart, so
        # polish directly in ell where the plain chart is well behaved
        g = lambda L: width_residual(L, mass, p)
        lo, hi = 0.9 * ell, min(1.1 * ell, ell_cap * (1.0 - 1e-9))
        ell = optimize.brentq(g, lo, hi, xtol=1e-15 * ell_cap, rtol=8.9e-16)
    return ell


@dataclass
class EquilibriumShape:
    """Solved static profile with spectrally accurate evaluation.

    The profile is stored as node values on a Chebyshev-Lobatto grid over
    [-ell, ell] together with compact Chebyshev series for fast evaluation.
    height, slope, and curvature accept scalars or arrays.
    """

    params: PhysicalParams
    mass: float
    ell: float
    pressure: float
    apex_height: float
    x: np.ndarray
    zeta: np.ndarray
    dzeta: np.ndarray
    d2zeta: np.ndarray
    _cz: np.ndarray = field(repr=False, default=None)
    _cdz: np.ndarray = field(repr=False, default=None)
    _cd2z: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self._cz is None:
            self._cz = chebgrid.fit_coeffs(self.zeta)
            self._cdz = chebgrid.fit_coeffs(self.dzeta)
            self._cd2z = chebgrid.fit_coeffs(self.d2zeta)

    @property
    def interval(self):
        return (-self.ell, self.ell)

    def height(self, xq):
        return chebgrid.cheb_series_eval(self._cz, -self.ell, self.ell, xq)

    def slope(self, xq):
        return chebgrid.cheb_series_eval(self._cdz, -self.ell, self.ell, xq)

    def curvature(self, xq):
        """Second derivative of the profile (not the normalized curvature)."""
        return chebgrid.cheb_series_eval(self._cd2z, -self.ell, self.ell, xq)

    def quadrature_mass(self) -> float:
        w = chebgrid.clenshaw_curtis_weights(self.x.size - 1, -self.ell, self.ell)
        return float(w @ self.zeta)


def solve_equilibrium(mass: float, p: PhysicalParams, n_profile: int = 2048) -> EquilibriumShape:
    """Solve for the static drop of the given mass.

    Returns the profile sampled on n_profile+1 Chebyshev-Lobatto nodes with
    closed-form slope and second derivative at each node; endpoint values are
    exact by construction.
    """
    if n_profile % 2 != 0 or n_profile < 8:
        raise ValueError("n_profile must be even and at least 8")
    ell = solve_half_width(mass, p)
    p0 = equilibrium_pressure(mass, ell, p)
    ell_cap = max_half_width(mass, p)
    rho = ell / ell_cap
    tau = math.sqrt((1.0 - rho) * (1.0 + rho))
    if tau < 1e-4:
        # the inclination chart develops an unresolvable boundary layer on
        # near-puddle drops; width, pressure, and apex remain available
        # through solve_half_width and equilibrium_pressure
        raise RuntimeError(
            "drop is too close to the puddle limit for profile construction "
            f"(tau = {tau:.2e}); reduce the mass or gravity"
        )
    psi0 = p.slope_angle

    # arc coordinate r(psi) on the left half via a spectral antiderivative;
    # refine until the fitted arc reproduces the solved half-width
    for n_fit in (256, 512, 1024, 2048, 4096):
        psi_nodes = chebgrid.lobatto_nodes(n_fit, 0.0, psi0)
        arc_series = chebgrid.cheb_antiderivative_coeffs(
            _arc_integrand(psi_nodes, p0, tau, p), 0.0, psi0
        )
        r_nodes = chebgrid.cheb_series_eval(arc_series, 0.0, psi0, psi_nodes)
        ok = np.all(np.diff(r_nodes) > 0) and abs(r_nodes[-1] - ell) < 1e-10 * ell
        if ok:
            break
    if not ok:
        raise RuntimeError(
            "profile fit did not converge; drop too close to the puddle limit"
        )
    inv_guess = interpolate.PchipInterpolator(r_nodes, psi_nodes)

    x = chebgrid.lobatto_nodes(n_profile, -ell, ell)
    n_half = n_profile // 2  # node count strictly left of center
    xl = x[: n_half + 1]  # [-ell, ..., 0]

    # invert r(psi) = -x per node: pchip seed, then Newton with exact slope
    target = np.clip(-xl, 0.0, r_nodes[-1])
    psi = np.clip(inv_guess(target), 0.0, psi0)
    for _ in range(60):
        fval = chebgrid.cheb_series_eval(arc_series, 0.0, psi0, psi) - target
        dval = _arc_integrand(psi, p0, tau, p)
        step = fval / dval
        psi = np.clip(psi - step, 0.0, psi0)
        if np.max(np.abs(step)) < 1e-15 * psi0:
            break
    psi[0] = psi0  # contact point and apex are exact in the psi chart
    psi[-1] = 0.0

    zl = _height_of_psi(psi, p0, tau, p)
    zl[0] = 0.0
    sl = np.tan(psi)
    d2l = (p.g * zl - p0) * (1.0 + sl * sl) ** 1.5 / p.sigma

    zeta = np.concatenate([zl, zl[-2::-1]])
    dzeta = np.concatenate([sl, -sl[-2::-1]])
    d2zeta = np.concatenate([d2l, d2l[-2::-1]])

    apex = float(_height_of_psi(0.0, p0, tau, p))
    return EquilibriumShape(
        params=p, mass=mass, ell=ell, pressure=p0, apex_height=apex,
        x=x, zeta=zeta, dzeta=dzeta, d2zeta=d2zeta,
    )
