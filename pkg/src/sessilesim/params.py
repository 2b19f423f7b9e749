"""Physical constants and contact-point response laws."""

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PhysicalParams:
    """Bulk and interface constants of the drop.

    Parameters
    ----------
    mu : float
        Dynamic viscosity of the liquid.
    g : float
        Gravitational acceleration (acts along -x2).
    sigma : float
        Surface tension of the free boundary.
    gamma_jump : float
        Jump in wall energy density across each contact point. Must lie
        strictly between 0 and sigma; the equilibrium contact angle is then
        arccos(-gamma_jump/sigma), an obtuse partial-wetting angle.
    beta : float
        Navier slip coefficient on the substrate.
    """

    mu: float = 1.0
    g: float = 1.0
    sigma: float = 1.0
    gamma_jump: float = 0.6
    beta: float = 1.0

    def __post_init__(self):
        for name in ("mu", "g", "sigma", "beta"):
            v = float(getattr(self, name))
            if not (math.isfinite(v) and v > 0.0):
                raise ValueError(f"{name} must be positive and finite, got {v!r}")
        if not (0.0 < self.gamma_jump < self.sigma):
            raise ValueError(
                "gamma_jump must satisfy 0 < gamma_jump < sigma, got "
                f"{self.gamma_jump!r} with sigma={self.sigma!r}"
            )

    @property
    def endpoint_slope(self) -> float:
        """Magnitude of the equilibrium surface slope at the contact points."""
        return math.sqrt(self.sigma**2 - self.gamma_jump**2) / self.gamma_jump

    @property
    def slope_angle(self) -> float:
        """Inclination psi0 of the equilibrium surface at contact, in (0, pi/2)."""
        return math.atan(self.endpoint_slope)

    @property
    def equilibrium_angle(self) -> float:
        """Equilibrium contact angle, measured through the liquid."""
        return math.acos(-self.gamma_jump / self.sigma)


class ContactResponse:
    """Odd increasing law tying contact-point speed to the Young force defect.

    velocity(z) is the speed produced by an uncompensated force z, and
    force(v) is its inverse. kappa is the drag d force / d speed at rest,
    which controls the linearized relaxation of the contact points.
    """

    def velocity(self, z):
        raise NotImplementedError

    def force(self, v):
        raise NotImplementedError

    def force_slope(self, v) -> float:
        """Local drag d force / d speed at speed v."""
        raise NotImplementedError

    @property
    def kappa(self) -> float:
        raise NotImplementedError

    def linearization_defect(self, z):
        """force(z)/kappa - z, the superlinear part of the normalized law."""
        return self.force(z) / self.kappa - np.asarray(z, dtype=float)


@dataclass(frozen=True)
class LinearResponse(ContactResponse):
    """velocity = force / drag."""

    drag: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.drag) and self.drag > 0.0):
            raise ValueError(f"drag must be positive, got {self.drag!r}")

    def velocity(self, z):
        return np.asarray(z, dtype=float) / self.drag

    def force(self, v):
        return self.drag * np.asarray(v, dtype=float)

    def force_slope(self, v) -> float:
        return self.drag

    @property
    def kappa(self) -> float:
        return self.drag


@dataclass(frozen=True)
class SinhResponse(ContactResponse):
    """velocity = a * sinh(b * force); saturating drag at small forcing.

    Odd, smooth, strictly increasing, with kappa = 1/(a*b) at rest. Models a
    contact line that depins progressively as the force defect grows.
    """

    a: float = 1.0
    b: float = 1.0

    def __post_init__(self):
        for name in ("a", "b"):
            v = float(getattr(self, name))
            if not (math.isfinite(v) and v > 0.0):
                raise ValueError(f"{name} must be positive, got {v!r}")

    def velocity(self, z):
        return self.a * np.sinh(self.b * np.asarray(z, dtype=float))

    def force(self, v):
        return np.arcsinh(np.asarray(v, dtype=float) / self.a) / self.b

    def force_slope(self, v) -> float:
        return 1.0 / (self.b * math.hypot(self.a, float(v)))

    @property
    def kappa(self) -> float:
        return 1.0 / (self.a * self.b)
