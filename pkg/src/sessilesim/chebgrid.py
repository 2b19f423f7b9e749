"""Chebyshev-Lobatto grid utilities.

Shared by the equilibrium profile table, the dynamic surface grid, and the
surface coupling of the flow solver. Keeping one implementation matters:
the energy bookkeeping assumes that interpolation, differentiation, and
quadrature all refer to the same nodes and weights.
"""

import math

import numpy as np
from scipy.fft import dct


def lobatto_nodes(n, a=-1.0, b=1.0):
    """Return n+1 Chebyshev-Lobatto points on [a, b], ascending.

    Nodes cluster at both endpoints like (b-a)/n^2, which is what the
    contact-point stencils and the corner-graded diagnostics expect.
    """
    j = np.arange(n + 1)
    t = np.cos(np.pi * j / n)
    t = 0.5 * (t - t[::-1])  # enforce exact antisymmetry of the pattern
    x = 0.5 * (a + b) - 0.5 * (b - a) * t
    x[0] = a
    x[-1] = b
    return x


def barycentric_weights(n):
    """Barycentric weights for the Lobatto family (up to common scaling)."""
    w = np.ones(n + 1)
    w[1::2] = -1.0
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def clenshaw_curtis_weights(n, a=-1.0, b=1.0):
    """Quadrature weights on lobatto_nodes(n, a, b), exact through degree n.

    Waldvogel-style construction through a single DCT-I of the Chebyshev
    moments mu_k = int T_k = 2/(1-k^2) for even k.
    """
    if n == 0:
        return np.array([b - a])
    k = np.arange(n + 1)
    mu = np.zeros(n + 1)
    even = k % 2 == 0
    mu[even] = 2.0 / (1.0 - k[even] ** 2)
    s = np.full(n + 1, 1.0 / n)
    s[0] = s[-1] = 0.5 / n
    sm = s * mu
    w = dct(sm, type=1) + sm[0] + sm[-1] * np.where(k % 2 == 0, 1.0, -1.0)
    w[0] *= 0.5
    w[-1] *= 0.5
    # nodes ascend from a, i.e. theta runs pi..0; weights are symmetric anyway
    return 0.5 * (b - a) * w[::-1].copy()


def diffmat(x):
    """Dense barycentric differentiation matrix for nodes x."""
    x = np.asarray(x, dtype=float)
    n = x.size - 1
    lam = barycentric_weights(n)
    dx = x[:, None] - x[None, :]
    np.fill_diagonal(dx, 1.0)
    d = (lam[None, :] / lam[:, None]) / dx
    np.fill_diagonal(d, 0.0)
    np.fill_diagonal(d, -d.sum(axis=1))
    return d


def barycentric_eval(x_nodes, values, x_eval):
    """Evaluate the interpolant of (x_nodes, values) at x_eval.

    Exact at the nodes. values may be (n+1,) or (n+1, m) for batched fields.
    """
    x_nodes = np.asarray(x_nodes, dtype=float)
    vals = np.asarray(values, dtype=float)
    xe = np.atleast_1d(np.asarray(x_eval, dtype=float))
    lam = barycentric_weights(x_nodes.size - 1)

    diff = xe[:, None] - x_nodes[None, :]
    hit = np.isclose(diff, 0.0, rtol=0.0, atol=1e-300)
    diff = np.where(hit, 1.0, diff)
    c = lam[None, :] / diff
    denom = c.sum(axis=1)
    num = c @ vals
    out = (num.T / denom).T

    rows, cols = np.nonzero(hit)
    if rows.size:
        out[rows] = vals[cols]
    if np.isscalar(x_eval) or np.ndim(x_eval) == 0:
        return out[0]
    return out


def cheb_coeffs(values):
    """Chebyshev coefficients of the interpolant through Lobatto samples.

    values are ordered with ascending x (theta = pi..0); returns a_k such
    that f(x) = sum a_k T_k(t), t the node pattern on [-1, 1].
    """
    v = np.asarray(values, dtype=float)[::-1]
    n = v.shape[0] - 1
    a = dct(v, type=1, axis=0) / n
    a[0] *= 0.5
    a[-1] *= 0.5
    return a


def cheb_values(coeffs):
    """Inverse of cheb_coeffs."""
    a = np.array(coeffs, dtype=float)
    n = a.shape[0] - 1
    a[0] *= 2.0
    a[-1] *= 2.0
    v = 0.5 * dct(a, type=1, axis=0)
    return v[::-1]


def lowpass(values, keep):
    """Zero all Chebyshev coefficients with index > keep and resample."""
    a = cheb_coeffs(values)
    if keep + 1 < a.shape[0]:
        a[keep + 1:] = 0.0
    return cheb_values(a)


def cheb_antiderivative_coeffs(values, a, b):
    """Chebyshev coefficients of int_a^x f, from samples of f on the Lobatto grid.

    Returns a series one degree higher than the input; evaluate it anywhere
    on [a, b] with cheb_series_eval.
    """
    c = cheb_coeffs(values)
    n = c.shape[0] - 1
    h = 0.5 * (b - a)
    cpad = np.concatenate([c, [0.0, 0.0]])
    out = np.zeros(n + 2)
    out[1] = h * (cpad[0] - 0.5 * cpad[2])
    m = np.arange(2, n + 2)
    out[2:] = h * (cpad[1:n + 1] - cpad[3:n + 3]) / (2.0 * m)
    signs = np.where(np.arange(1, n + 2) % 2 == 0, 1.0, -1.0)
    out[0] = -np.sum(out[1:] * signs)
    return out


def cheb_series_eval(coeffs, a, b, x):
    """Evaluate a Chebyshev series given on [a, b] at points x (Clenshaw)."""
    t = (2.0 * np.asarray(x, dtype=float) - (a + b)) / (b - a)
    return np.polynomial.chebyshev.chebval(t, coeffs)


def fit_coeffs(values, rel_tol=1e-15):
    """Chebyshev coefficients with the negligible tail dropped.

    Keeps leading coefficients through the last one above rel_tol times the
    maximum magnitude. Cheap to evaluate afterwards via cheb_series_eval.
    """
    c = cheb_coeffs(values)
    mag = np.abs(c)
    cut = rel_tol * mag.max()
    keep = np.nonzero(mag > cut)[0]
    k = keep[-1] + 1 if keep.size else 1
    return c[:k].copy()


def stencil_weights(x, x0, m):
    """Finite-difference weights for the m-th derivative at x0 from nodes x.

    Small dense Vandermonde solve; used for the one-sided contact-slope
    stencils on the clustered grid.
    """
    x = np.asarray(x, dtype=float)
    k = x.size
    A = np.vander(x - x0, k, increasing=True).T
    rhs = np.zeros(k)
    rhs[m] = float(math.factorial(m))
    return np.linalg.solve(A, rhs)
