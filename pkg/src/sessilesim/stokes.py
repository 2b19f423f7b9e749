"""Flow solve on the fixed reference domain.

The mixed finite-element solve couples to the surface through two narrow
interfaces that live here: the state-dependent load functional paired with
sampled boundary traces, and the contact-flux closure rewriting the corner
capillary flux through the contact law. Boundary traces are routed through
the same endpoint-preserving low-pass projection that the transport step
uses; pairing loads and transport through one operator is what closes the
semi-discrete energy identity to roundoff.
"""

import math
from dataclasses import dataclass

import numpy as np

from .geometry import SurfaceGrid
from .params import ContactResponse, PhysicalParams


class MeshError(RuntimeError):
    """Raised when triangulation quality or conformity checks fail."""


class AssemblyError(RuntimeError):
    """Raised when the system cannot be assembled from the given state."""


class SingularSystemError(RuntimeError):
    """Raised when the saddle-point factorization loses definiteness."""


@dataclass(frozen=True)
class SurfaceLoads:
    """Load densities of the free-surface stress on the surface grid.

    flux is the capillary flux sigma * m / sqrt(1 + m^2) of the stretched
    slope m = K1 * d1(zeta); gravity is g * zeta. Corner values of flux feed
    the contact terms of the load functional.
    """

    j1: float
    k1: float
    zeta: np.ndarray
    slope: np.ndarray
    mhat: np.ndarray
    gravity: np.ndarray
    flux: np.ndarray

    @classmethod
    def from_state(cls, state, shape, p: PhysicalParams) -> "SurfaceLoads":
        grid = state.grid
        j1 = state.j1
        zeta = state.height(shape)
        slope = state.slope(shape)
        mhat = slope / j1
        flux = p.sigma * mhat / np.sqrt(1.0 + mhat * mhat)
        return cls(
            j1=j1,
            k1=state.k1,
            zeta=zeta,
            slope=slope,
            mhat=mhat,
            gravity=p.g * zeta,
            flux=flux,
        )


def surface_work(loads: SurfaceLoads, grid: SurfaceGrid, w_hat,
                 keep=None) -> float:
    """Load functional on one sampled boundary trace.

    w_hat holds samples of J1 w2 - w1 d1(zeta) along the surface; the value
    returned is what the weak form equates to the dissipation quadratic form
    of the solved flow. The trace is projected before pairing; the corner
    terms evaluate the projected trace at the endpoints, so the whole
    functional is bounded on the band-limited trace space.
    """
    w_hat = np.asarray(w_hat, dtype=float)
    if w_hat.shape != grid.x.shape:
        raise ValueError("trace samples must live on the surface grid")
    what = grid.project_trace(w_hat, keep)
    k1fac = 1.0 / loads.j1
    val = -grid.inner(loads.gravity, what)
    val -= k1fac * grid.inner(loads.flux, grid.D @ what)
    val += k1fac * (loads.flux[-1] * what[-1] - loads.flux[0] * what[0])
    return float(val)


def surface_load_covector(loads: SurfaceLoads, grid: SurfaceGrid,
                          keep=None, corner_flux=None) -> np.ndarray:
    """Vector g with surface_work(loads, grid, w) == g . w for all traces.

    This is the form the element assembly consumes: one dense vector per
    state, dotted against the trace samples of each boundary basis function.
    corner_flux, when given, substitutes a (left, right) pair for the two
    endpoint values of loads.flux in the contact terms; the implicit corner
    closure passes the lagged law fluxes through it.
    """
    proj = grid.trace_projection_matrix(keep)
    k1fac = 1.0 / loads.j1
    if corner_flux is None:
        corner_flux = (loads.flux[0], loads.flux[-1])
    nodal = -(grid.w * loads.gravity)
    nodal -= k1fac * (grid.D.T @ (grid.w * loads.flux))
    nodal[-1] += k1fac * corner_flux[1]
    nodal[0] -= k1fac * corner_flux[0]
    return proj.T @ nodal


def contact_flux(p: PhysicalParams, response: ContactResponse,
                 rate: float, side: str):
    """Corner capillary flux written through the contact law, with slope.

    Given a contact-point speed, the law pins the dynamic angle, hence the
    corner value of sigma * m / sqrt(1 + m^2). Returns (value, d value /
    d rate); the derivative drives the implicit corner closure of the
    assembled system.
    """
    w = float(response.force(rate))
    if side == "left":
        young = p.gamma_jump + w
    elif side == "right":
        young = p.gamma_jump - w
    else:
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    rad = p.sigma ** 2 - young ** 2
    if young <= 0.0 or rad <= 0.0:
        raise AssemblyError(
            f"contact law degenerate at rate {rate!r} on {side} side: "
            f"uncompensated stress {w!r} leaves no admissible angle"
        )
    root = math.sqrt(rad)
    dphi = -young * float(response.force_slope(rate)) / root
    if side == "left":
        return root, dphi
    return -root, dphi

# ---------------------------------------------------------------------------
# mixed finite elements on the reference droplet

_B1 = 0.470142064105115
_A1 = 0.059715871789770
_B2 = 0.101286507323456
_A2 = 0.797426985353087
# degree-5 rule, 7 points; weights scaled by the 1/2 reference area
_TRI_BARY = np.array([
    [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
    [_A1, _B1, _B1],
    [_B1, _A1, _B1],
    [_B1, _B1, _A1],
    [_A2, _B2, _B2],
    [_B2, _A2, _B2],
    [_B2, _B2, _A2],
])
_TRI_W = 0.5 * np.array([
    0.225,
    0.132394152788506, 0.132394152788506, 0.132394152788506,
    0.125939180544827, 0.125939180544827, 0.125939180544827,
])

# 1D quadratic mass matrix on [0, 1], nodes (left, mid, right)
_EDGE_MASS = np.array([
    [2.0 / 15.0, 1.0 / 15.0, -1.0 / 30.0],
    [1.0 / 15.0, 8.0 / 15.0, 1.0 / 15.0],
    [-1.0 / 30.0, 1.0 / 15.0, 2.0 / 15.0],
])


def _p2_tables(bary):
    """Quadratic shape values and reference gradients at barycentric points.

    Node order matches the mesh connectivity: three vertices, then the
    midsides opposite them.
    """
    lam0, lam1, lam2 = bary[:, 0], bary[:, 1], bary[:, 2]
    n = np.stack([
        lam0 * (2.0 * lam0 - 1.0),
        lam1 * (2.0 * lam1 - 1.0),
        lam2 * (2.0 * lam2 - 1.0),
        4.0 * lam1 * lam2,
        4.0 * lam2 * lam0,
        4.0 * lam0 * lam1,
    ], axis=1)
    dn = np.empty((bary.shape[0], 6, 2))
    dn[:, 0, 0] = 1.0 - 4.0 * lam0
    dn[:, 0, 1] = 1.0 - 4.0 * lam0
    dn[:, 1, 0] = 4.0 * lam1 - 1.0
    dn[:, 1, 1] = 0.0
    dn[:, 2, 0] = 0.0
    dn[:, 2, 1] = 4.0 * lam2 - 1.0
    dn[:, 3, 0] = 4.0 * lam2
    dn[:, 3, 1] = 4.0 * lam1
    dn[:, 4, 0] = -4.0 * lam2
    dn[:, 4, 1] = 4.0 * (lam0 - lam2)
    dn[:, 5, 0] = 4.0 * (lam0 - lam1)
    dn[:, 5, 1] = -4.0 * lam1
    return n, dn


def _edge_shapes(t):
    t = np.asarray(t, dtype=float)
    return np.stack([
        (1.0 - t) * (1.0 - 2.0 * t),
        4.0 * t * (1.0 - t),
        t * (2.0 * t - 1.0),
    ], axis=-1)


def _edge_sampler(edges, stations, xq, n_nodes):
    """Sparse matrix sampling a P2 field along a chain of boundary edges.

    Station abscissae are shared by construction between the chain and the
    mesh, and midside nodes sit at the midpoint abscissa, so the edge
    parameter is exactly linear in x1.
    """
    from scipy import sparse

    idx = np.clip(np.searchsorted(stations, xq, side="right") - 1,
                  0, edges.shape[0] - 1)
    t = (xq - stations[idx]) / (stations[idx + 1] - stations[idx])
    vals = _edge_shapes(t)
    rows = np.repeat(np.arange(xq.size), 3)
    cols = edges[idx].ravel()
    m = sparse.coo_matrix((vals.ravel(), (rows, cols)),
                          shape=(xq.size, n_nodes))
    return m.tocsr()


class _ReducedFactor:
    """LU factorization of a saddle system with pinned dofs eliminated.

    Built once per matrix so a fixed-operator iteration (the corner
    closure with a frozen Robin weight) pays for one factorization only.
    """

    def __init__(self, s, fixed, values):
        from scipy.sparse.linalg import splu

        n = s.shape[0]
        mask = np.zeros(n, dtype=bool)
        mask[fixed] = True
        self._free = np.flatnonzero(~mask)
        self._fixed = fixed
        self._values = values
        self._n = n
        s = s.tocsr()
        self._lift = s[:, fixed] @ values if fixed.size else np.zeros(n)
        self._a = s[self._free][:, self._free].tocsc()
        try:
            self._lu = splu(self._a)
        except RuntimeError as exc:
            raise SingularSystemError(str(exc)) from exc

    def solve(self, f):
        b = (f - self._lift)[self._free]
        x = self._lu.solve(b)
        res = float(np.linalg.norm(self._a @ x - b))
        scale = 1.0 + float(np.linalg.norm(b))
        if not np.all(np.isfinite(x)) or res > 1e-10 * scale:
            raise SingularSystemError(
                f"saddle solve residual {res:.3e} exceeds tolerance "
                f"{1e-10 * scale:.3e}")
        out = np.zeros(self._n)
        out[self._fixed] = self._values
        out[self._free] = x
        return out, res / scale


@dataclass
class SurfaceTraces:
    """Boundary samples of one solved flow on the surface grid stations."""

    normal: np.ndarray
    slip: np.ndarray
    corner_left: tuple
    corner_right: tuple


@dataclass
class FlowField:
    """One quasi-stationary flow solve.

    velocity is nodal (n_nodes, 2); pressure holds vertex values of the
    recovered linear field. dissipation is the flow's own quadratic form,
    viscous plus slip, with no contact contribution. trace_raw and trace
    are the transport samples J1 u2 - u1 d1(zeta) before and after the
    low-pass projection; mass_flux is the quadrature integral of the
    projected trace and vanishes to solver precision by construction.
    corner_left and corner_right are the contact-point speeds read off the
    projected trace, the same values the corner closure converged on; the
    raw nodal speeds are recoverable as -trace_raw[0] / d1(zeta)(-ell) and
    -trace_raw[-1] / d1(zeta)(ell).
    """

    velocity: np.ndarray
    pressure: np.ndarray
    dissipation: float
    corner_left: float
    corner_right: float
    picard_iters: int
    residual: float
    momentum: np.ndarray
    volume: float
    trace_raw: np.ndarray | None = None
    trace: np.ndarray | None = None
    bottom_u1: np.ndarray | None = None
    mass_flux: float = 0.0


class FlowSolver:
    """Taylor-Hood solve of the transformed Stokes system on a fixed mesh.

    The mesh discretizes the equilibrium droplet; the perturbed geometry
    enters through the lower-triangular mapping gradient, evaluated at the
    quadrature points of each element. Velocity is quadratic, pressure
    linear; the vertical velocity is constrained to zero on the substrate,
    the surface is loaded with the capillary-gravity covector, and the two
    contact fluxes are closed implicitly through the contact law.

    The pressure basis swaps one vertex hat for the global constant, and
    that constant's row imposes a zero spectral mass flux of the projected
    transport trace instead of the element-wise divergence average. With
    this row the rest state solves the discrete system exactly and the
    transported surface conserves mass to roundoff per step.
    """

    def __init__(self, mesh, grid: SurfaceGrid, shape, p: PhysicalParams,
                 response: ContactResponse = None,
                 robin_weight: str = "equilibrium", n_fft: int = 4096):
        from scipy import sparse

        if robin_weight not in ("equilibrium", "perturbed"):
            raise ValueError(
                f"robin_weight must be 'equilibrium' or 'perturbed', "
                f"got {robin_weight!r}")
        self.mesh = mesh
        self.grid = grid
        self.shape = shape
        self.p = p
        self.response = response
        self.robin_weight = robin_weight
        self.n_fft = n_fft

        tris = mesh.triangles
        nodes = mesh.nodes
        self.n_nodes = nodes.shape[0]
        self.n_press = mesh.n_vertices
        self.ndof_u = 2 * self.n_nodes
        xe = nodes[tris]                                  # (T, 6, 2)
        nq = _TRI_BARY.shape[0]
        self._shape_n, dn = _p2_tables(_TRI_BARY)
        self._psi = _TRI_BARY.copy()                      # P1 values
        nt = tris.shape[0]
        self._grads = np.empty((nq, nt, 6, 2))
        self._wdet = np.empty((nq, nt))
        self._qxy = np.empty((nq, nt, 2))
        for q in range(nq):
            jg = np.einsum("aj,tai->tij", dn[q], xe)
            det = jg[:, 0, 0] * jg[:, 1, 1] - jg[:, 0, 1] * jg[:, 1, 0]
            if det.min() <= 0.0:
                raise MeshError(
                    "isoparametric element map is not orientation "
                    "preserving at an interior quadrature point")
            inv = np.empty_like(jg)
            inv[:, 0, 0] = jg[:, 1, 1]
            inv[:, 0, 1] = -jg[:, 0, 1]
            inv[:, 1, 0] = -jg[:, 1, 0]
            inv[:, 1, 1] = jg[:, 0, 0]
            inv /= det[:, None, None]
            self._grads[q] = np.einsum("aj,tji->tai", dn[q], inv)
            self._wdet[q] = _TRI_W[q] * det
            self._qxy[q] = np.einsum("a,tai->ti", self._shape_n[q], xe)

        edofs = np.empty((nt, 12), dtype=int)
        edofs[:, 0::2] = 2 * tris
        edofs[:, 1::2] = 2 * tris + 1
        self._edofs = edofs
        self._rows_k = np.repeat(edofs, 12, axis=1).ravel()
        self._cols_k = np.tile(edofs, (1, 12)).ravel()
        pdofs = tris[:, :3]
        self._rows_b = np.repeat(pdofs, 12, axis=1).ravel()
        self._cols_b = np.tile(edofs, (1, 3)).ravel()

        # substrate slip matrix, unit coefficient; the substrate is straight
        # so edge lengths are exact
        se = mesh.bottom_edges
        h = nodes[se[:, 2], 0] - nodes[se[:, 0], 0]
        vals = h[:, None, None] * _EDGE_MASS[None, :, :]
        rows = np.repeat(2 * se, 3, axis=1).ravel()
        cols = np.tile(2 * se, (1, 3)).ravel()
        self._slip_unit = sparse.coo_matrix(
            (vals.ravel(), (rows, cols)),
            shape=(self.ndof_u, self.ndof_u)).tocsr()

        self._bottom_nodes = np.unique(se)
        self._boundary_nodes = np.unique(
            np.concatenate([se.ravel(), mesh.surface_edges.ravel()]))
        self._c_star = mesh.corner_left
        # interior anchor for the manufactured-solution pin; corner
        # vertices are a poor anchor because their pressure is only
        # weakly coupled under a fully clamped velocity
        target = np.array([0.0, 0.5 * float(shape.height(0.0))])
        verts = nodes[:self.n_press]
        self._pin_vertex = int(np.argmin(
            np.hypot(verts[:, 0] - target[0], verts[:, 1] - target[1])))
        self._surf_sampler = _edge_sampler(
            mesh.surface_edges, mesh.stations, grid.x, self.n_nodes)
        self._bot_sampler = _edge_sampler(
            mesh.bottom_edges, mesh.stations, grid.x, self.n_nodes)
        self._proj_w = grid.trace_projection_matrix().T @ grid.w

    # -- coefficient fields ------------------------------------------------

    def _coefficients(self, state, ext=None):
        """Mapping coefficient arrays at the quadrature points.

        Returns (a00, a01, a11, jw): the two nonconstant rows of the
        inverse-transpose mapping gradient and the Jacobian, each (nq, nt).
        state None selects the identity map.
        """
        nq, nt = self._wdet.shape
        if state is None:
            one = np.ones((nq, nt))
            return 1.0, np.zeros((nq, nt)), one, one.copy()
        from .geometry import HarmonicExtension, mapping_coefficients

        if ext is None:
            ext = HarmonicExtension(self.shape, state.grid, state.eps,
                                    n_fft=self.n_fft)
        mf = mapping_coefficients(
            self.shape, ext, state.l, state.r,
            self._qxy[:, :, 0].ravel(), self._qxy[:, :, 1].ravel(),
            clamp=True)
        a01 = mf.inv_t01.reshape(nq, nt)
        a11 = mf.inv_t11.reshape(nq, nt)
        jw = mf.jac.reshape(nq, nt)
        return 1.0 / mf.j1, a01, a11, jw

    # -- assembly ----------------------------------------------------------

    def _assemble_bulk(self, mu, coeffs):
        """Viscous stiffness and divergence blocks for given coefficients."""
        from scipy import sparse

        a00, a01, a11, jw = coeffs
        nq, nt = self._wdet.shape
        ke = np.zeros((nt, 12, 12))
        be = np.zeros((nt, 3, 12))
        for q in range(nq):
            g = self._grads[q]
            g0 = a00 * g[:, :, 0] + a01[q][:, None] * g[:, :, 1]
            g1 = a11[q][:, None] * g[:, :, 1]
            c = self._wdet[q] * jw[q]
            cmu = (mu * c)[:, None, None]
            d00 = np.einsum("ta,tb->tab", g0, g0)
            d11 = np.einsum("ta,tb->tab", g1, g1)
            lap = d00 + d11
            ke[:, 0::2, 0::2] += cmu * (lap + d00)
            ke[:, 0::2, 1::2] += cmu * np.einsum("ta,tb->tab", g1, g0)
            ke[:, 1::2, 0::2] += cmu * np.einsum("ta,tb->tab", g0, g1)
            ke[:, 1::2, 1::2] += cmu * (lap + d11)
            be[:, :, 0::2] -= np.einsum("t,c,ta->tca", c, self._psi[q], g0)
            be[:, :, 1::2] -= np.einsum("t,c,ta->tca", c, self._psi[q], g1)
        k = sparse.coo_matrix(
            (ke.ravel(), (self._rows_k, self._cols_k)),
            shape=(self.ndof_u, self.ndof_u)).tocsr()
        b = sparse.coo_matrix(
            (be.ravel(), (self._rows_b, self._cols_b)),
            shape=(self.n_press, self.ndof_u)).tocsr()
        return k, b

    def _flux_row(self, zx, j1):
        """Velocity-dof covector of the projected-trace mass flux."""
        row = np.zeros(self.ndof_u)
        row[0::2] = -self._surf_sampler.T @ (zx * self._proj_w)
        row[1::2] = j1 * (self._surf_sampler.T @ self._proj_w)
        return row

    def _surface_force(self, cov, zx, j1):
        """Velocity load vector representing the surface covector."""
        f = np.zeros(self.ndof_u)
        f[0::2] = -self._surf_sampler.T @ (zx * cov)
        f[1::2] = j1 * (self._surf_sampler.T @ cov)
        return f

    def operator_blocks(self, state=None, pressure_mode: str = "standard"):
        """Assembled blocks for inspection: dict with K, B, slip.

        pressure_mode 'flux' replaces the constant-pressure row by the
        spectral mass-flux functional and requires a state.
        """
        coeffs = self._coefficients(state)
        k, b = self._assemble_bulk(self.p.mu, coeffs)
        if pressure_mode == "flux":
            if state is None:
                raise ValueError("flux pressure row needs a surface state")
            zx = state.slope(self.shape)
            b = b.tolil()
            b[self._c_star, :] = -self._flux_row(zx, state.j1)
            b = b.tocsr()
        elif pressure_mode != "standard":
            raise ValueError(f"unknown pressure_mode {pressure_mode!r}")
        return {"K": k, "B": b, "slip": self.p.beta * self._slip_unit}

    # -- linear algebra ----------------------------------------------------

    def _reduce_and_solve(self, s, f, fixed, values):
        return _ReducedFactor(s, fixed, values).solve(f)

    def _saddle(self, k, b):
        from scipy import sparse

        return sparse.bmat([[k, b.T], [b, None]], format="csr")

    # -- physical solve ------------------------------------------------------

    def solve(self, state, picard_init=(0.0, 0.0), ext=None) -> FlowField:
        """Quasi-stationary flow for one surface state.

        The two corner fluxes are closed implicitly: each is linearized
        about a lagged contact-point speed and the solve is repeated until
        the corner velocities agree with the lag. The linearization slope
        is the law's own, either frozen at the equilibrium angle or
        re-evaluated at the lagged speed, per robin_weight.
        """
        if self.response is None:
            raise AssemblyError("physical solve needs a contact response")
        p = self.p
        loads = SurfaceLoads.from_state(state, self.shape, p)
        zx = loads.slope
        j1 = loads.j1
        if not (zx[0] > 0.0 and zx[-1] < 0.0):
            raise AssemblyError(
                "corner slopes have left the nondegenerate regime; the "
                "contact-flux closure is only valid while the surface "
                "meets the substrate transversally")
        coeffs = self._coefficients(state, ext=ext)
        k, b = self._assemble_bulk(p.mu, coeffs)
        k = k + p.beta * self._slip_unit
        b = b.tolil()
        b[self._c_star, :] = -self._flux_row(zx, j1)
        b = b.tocsr()

        fixed = 2 * self._bottom_nodes + 1
        fixed_vals = np.zeros(fixed.size)
        # corner speeds are read off the projected trace, V = -(Pw)(+-ell)
        # / d1(zeta)(+-ell); g_l, g_r represent the two endpoint
        # evaluations as velocity-dof covectors
        proj = self.grid.trace_projection_matrix()
        g_l = self._surface_force(proj[0], zx, j1)
        g_r = self._surface_force(proj[-1], zx, j1)
        k1fac = 1.0 / j1
        if self.robin_weight == "equilibrium":
            rad = p.sigma ** 2 - p.gamma_jump ** 2
            dphi0 = (-p.gamma_jump * float(self.response.force_slope(0.0))
                     / math.sqrt(rad))

        from scipy import sparse

        def robin_matrix(dphi_l, dphi_r):
            # rank-one pair per corner; both weights are nonnegative while
            # the corner slopes stay transversal, so the closure only adds
            # dissipation to the operator
            al = -k1fac * dphi_l / zx[0]
            ar = k1fac * dphi_r / zx[-1]
            il = np.flatnonzero(g_l)
            ir = np.flatnonzero(g_r)
            rows = np.concatenate(
                [np.repeat(il, il.size), np.repeat(ir, ir.size)])
            cols = np.concatenate(
                [np.tile(il, il.size), np.tile(ir, ir.size)])
            vals = np.concatenate([
                (al * np.outer(g_l[il], g_l[il])).ravel(),
                (ar * np.outer(g_r[ir], g_r[ir])).ravel(),
            ])
            return sparse.coo_matrix(
                (vals, (rows, cols)),
                shape=(self.ndof_u, self.ndof_u)).tocsr()

        vstar = (float(picard_init[0]), float(picard_init[1]))
        n_free = self.ndof_u + self.n_press
        iters = 0
        factor = None
        while True:
            iters += 1
            phi_l, dphi_l = contact_flux(p, self.response, vstar[0], "left")
            phi_r, dphi_r = contact_flux(p, self.response, vstar[1], "right")
            if self.robin_weight == "equilibrium":
                dphi_l = dphi_r = dphi0
            lag = (phi_l - dphi_l * vstar[0], phi_r - dphi_r * vstar[1])
            cov = surface_load_covector(loads, self.grid, corner_flux=lag)
            f = np.zeros(n_free)
            f[:self.ndof_u] = self._surface_force(cov, zx, j1)
            if factor is None or self.robin_weight != "equilibrium":
                s = self._saddle(k + robin_matrix(dphi_l, dphi_r), b)
                factor = _ReducedFactor(s, fixed, fixed_vals)
            x, res = factor.solve(f)
            u = x[:self.ndof_u]
            v = (-(g_l @ u) / zx[0], -(g_r @ u) / zx[-1])
            gap = max(abs(v[0] - vstar[0]), abs(v[1] - vstar[1]))
            if gap <= 1e-10 * (1.0 + max(abs(v[0]), abs(v[1]))):
                break
            if iters >= 10:
                raise AssemblyError(
                    f"corner closure stalled: lag gap {gap:.3e} after "
                    f"{iters} solves")
            vstar = v

        u = x[:self.ndof_u]
        praw = x[self.ndof_u:]
        press = praw + praw[self._c_star]
        press[self._c_star] = praw[self._c_star]
        diss = float(u @ (k @ u))
        u1s = self._surf_sampler @ u[0::2]
        u2s = self._surf_sampler @ u[1::2]
        trace_raw = j1 * u2s - zx * u1s
        trace = self.grid.project_trace(trace_raw)
        jw = coeffs[3]
        wjw = self._wdet * jw
        ue = u.reshape(-1, 2)[self.mesh.triangles]
        momentum = np.einsum("qt,qa,tai->i", wjw, self._shape_n, ue)
        return FlowField(
            velocity=u.reshape(-1, 2),
            pressure=press,
            dissipation=diss,
            corner_left=float(v[0]),
            corner_right=float(v[1]),
            picard_iters=iters,
            residual=res,
            momentum=momentum,
            volume=float(wjw.sum()),
            trace_raw=trace_raw,
            trace=trace,
            bottom_u1=self._bot_sampler @ u[0::2],
            mass_flux=float(self.grid.w @ trace),
        )

    # -- manufactured solve --------------------------------------------------

    def solve_manufactured(self, u_fn, p_fn, f_fn) -> FlowField:
        """Identity-map solve against manufactured data.

        Velocity is pinned to u_fn on the whole boundary, pressure at one
        vertex; f_fn supplies the residual body force of the manufactured
        pair. Used by the convergence harness.
        """
        coeffs = self._coefficients(None)
        k, b = self._assemble_bulk(self.p.mu, coeffs)
        n_free = self.ndof_u + self.n_press
        f = np.zeros(n_free)
        fq = f_fn(self._qxy.reshape(-1, 2)).reshape(*self._wdet.shape, 2)
        fe = np.einsum("qt,qa,qti->tai", self._wdet, self._shape_n, fq)
        np.add.at(f[:self.ndof_u].reshape(-1, 2), self.mesh.triangles, fe)
        bnodes = self._boundary_nodes
        ub = u_fn(self.mesh.nodes[bnodes])
        fixed = np.concatenate([
            2 * bnodes, 2 * bnodes + 1,
            [self.ndof_u + self._pin_vertex],
        ])
        values = np.concatenate([
            ub[:, 0], ub[:, 1],
            [float(p_fn(self.mesh.nodes[self._pin_vertex][None, :])[0])],
        ])
        order = np.argsort(fixed)
        s = self._saddle(k, b)
        x, res = self._reduce_and_solve(s, f, fixed[order], values[order])
        u = x[:self.ndof_u]
        return FlowField(
            velocity=u.reshape(-1, 2),
            pressure=x[self.ndof_u:],
            dissipation=float(u @ (k @ u)),
            corner_left=float(u[2 * self.mesh.corner_left]),
            corner_right=float(u[2 * self.mesh.corner_right]),
            picard_iters=0,
            residual=res,
            momentum=np.einsum(
                "qt,qa,tai->i", self._wdet, self._shape_n,
                u.reshape(-1, 2)[self.mesh.triangles]),
            volume=float(self._wdet.sum()),
        )

    # -- quadrature helpers ----------------------------------------------------

    def velocity_error(self, velocity, u_fn) -> float:
        """L2 error of a nodal velocity against a callable, identity map."""
        ue = velocity[self.mesh.triangles]
        uh = np.einsum("qa,tai->qti", self._shape_n, ue)
        ux = u_fn(self._qxy.reshape(-1, 2)).reshape(uh.shape)
        return float(np.sqrt(np.einsum(
            "qt,qti->", self._wdet, (uh - ux) ** 2)))

    def pressure_error(self, pressure, p_fn) -> float:
        """L2 error of a vertex pressure against a callable, identity map."""
        pe = pressure[self.mesh.triangles[:, :3]]
        ph = np.einsum("qc,tc->qt", self._psi, pe)
        px = p_fn(self._qxy.reshape(-1, 2)).reshape(ph.shape)
        return float(np.sqrt(np.einsum("qt,qt->", self._wdet,
                                       (ph - px) ** 2)))


def surface_traces(flow: FlowField, shape, grid: SurfaceGrid) -> SurfaceTraces:
    """Boundary trace report of one physical solve.

    normal is the velocity component through the moving surface per unit
    reference length, normalized by the equilibrium metric; slip is the
    horizontal velocity along the substrate; the corner tuples are the
    full velocity vectors there (the vertical component is constrained).
    """
    if flow.trace_raw is None:
        raise ValueError("flow was not solved against a surface state")
    metric = np.hypot(1.0, shape.slope(grid.x))
    return SurfaceTraces(
        normal=flow.trace_raw / metric,
        slip=flow.bottom_u1,
        corner_left=(flow.corner_left, 0.0),
        corner_right=(flow.corner_right, 0.0),
    )


def field_table(mesh, flow: FlowField) -> np.ndarray:
    """Nodal (x1, x2, u1, u2, p) table for one flow, midsides interpolated."""
    press = np.empty(mesh.nodes.shape[0])
    press[:mesh.n_vertices] = flow.pressure
    tris = mesh.triangles
    for a, (i, j) in enumerate(((1, 2), (2, 0), (0, 1)), start=3):
        press[tris[:, a]] = 0.5 * (flow.pressure[tris[:, i]]
                                   + flow.pressure[tris[:, j]])
    return np.column_stack([mesh.nodes, flow.velocity, press])
