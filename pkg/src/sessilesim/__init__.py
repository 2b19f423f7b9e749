"""Viscous sessile drop laboratory.

Quasi-stationary Stokes flow in a two-dimensional droplet with a free
capillary surface, Navier slip on the substrate, and dynamically moving
contact points.
"""

from .params import PhysicalParams, ContactResponse, LinearResponse, SinhResponse
from .equilibrium import (
    EquilibriumShape,
    equilibrium_pressure,
    max_half_width,
    solve_equilibrium,
    solve_half_width,
    width_residual,
)
from .geometry import (
    DomainError,
    HarmonicExtension,
    MappingFields,
    SurfaceGrid,
    check_diffeomorphism,
    dilation_defect,
    dilation_fields,
    extend_surface,
    mapping_coefficients,
    width_dilation,
)
from .perturbation import (
    RemainderInputs,
    cosine_terms,
    flux_terms,
    mean_curvature,
    remainder_O,
    remainder_Q,
    remainder_R,
    remainder_S,
)
from .dynamics import (
    ContactRates,
    StepError,
    SurfaceState,
    contact_rates,
    contact_velocity,
    one_sided_slope,
    transport_rate,
)
from .diagnostics import (
    DecayFit,
    EnergyBreakdown,
    FitError,
    center_of_mass,
    contact_dissipation,
    contact_slope_identity,
    dissipation,
    energy,
    energy_identity_residual,
    fit_decay_rate,
    mass,
    surface_h1_proxy,
)
from .stokes import (
    AssemblyError,
    MeshError,
    SingularSystemError,
    SurfaceLoads,
    contact_flux,
    surface_load_covector,
    surface_work,
)

__version__ = "0.1.0"

__all__ = [
    "PhysicalParams",
    "ContactResponse",
    "LinearResponse",
    "SinhResponse",
    "EquilibriumShape",
    "equilibrium_pressure",
    "max_half_width",
    "solve_equilibrium",
    "solve_half_width",
    "width_residual",
    "DomainError",
    "HarmonicExtension",
    "MappingFields",
    "SurfaceGrid",
    "check_diffeomorphism",
    "dilation_defect",
    "dilation_fields",
    "extend_surface",
    "mapping_coefficients",
    "width_dilation",
    "RemainderInputs",
    "cosine_terms",
    "flux_terms",
    "mean_curvature",
    "remainder_O",
    "remainder_Q",
    "remainder_R",
    "remainder_S",
    "ContactRates",
    "StepError",
    "SurfaceState",
    "contact_rates",
    "contact_velocity",
    "one_sided_slope",
    "transport_rate",
    "DecayFit",
    "EnergyBreakdown",
    "FitError",
    "center_of_mass",
    "contact_dissipation",
    "contact_slope_identity",
    "dissipation",
    "energy",
    "energy_identity_residual",
    "fit_decay_rate",
    "mass",
    "surface_h1_proxy",
    "AssemblyError",
    "MeshError",
    "SingularSystemError",
    "SurfaceLoads",
    "contact_flux",
    "surface_load_covector",
    "surface_work",
    "__version__",
]
