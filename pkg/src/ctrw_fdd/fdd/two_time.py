"""Joint law of (E_{t1}, E_{t2}) for the inverse stable subordinator.

With Delta = t2 - t1, the law splits into

* a part on the diagonal: no regeneration in (t1, t2], density in x
  ``d(x) = int_0^{t1} g(t1 - v, x) Phi[v + Delta, inf) dv``;
* an off-diagonal density on {y > x > 0}: regeneration at t1 + sigma, then a
  fresh inverse subordinator runs for Delta - sigma,
  ``f(x, y) = int_0^Delta psi(sigma; x) h(y - x; Delta - sigma) dsigma`` with
  ``psi(sigma; x) = int_0^{t1} g(t1 - v, x) phi(v + sigma) dv`` the joint
  density of (E_{t1}, R_{t1}).

``psi`` is evaluated for many (x, sigma) at once as a matrix product over a
fixed graded rule in v; the two end pieces of the v-range are done
analytically, which makes the rule uniform in sigma -> 0 and x -> 0.  Cell
probabilities use the distribution function P(E_T <= z) instead of h, so no
integration in y is needed.  :meth:`TwoTimeLaw.triple_density` evaluates the
same density from the three-fold integral over (v, sigma, w) with adaptive
quadrature, as an independent check.
"""

from __future__ import annotations

import numpy as np
from scipy.special import gamma

from ..errors import DomainError, ParameterError
from ..quadrature import QuadratureSpec, gauss_legendre, graded_rule, integrate_1d, integrate_nested
from ..stable_core import StableParams, density_table
from .kernels import levy_bar, levy_phi, stable_g
from .laws import JointGrid


def _lagrange4(values, h, xq):
    """Cubic (4-point Lagrange) interpolation on the uniform grid 0, h, 2h, ...

    ``values`` has shape (n, m); ``xq`` has shape (..., m) and column k of xq
    is interpolated from column k of values.  Zero for xq <= 0.
    """
    n = values.shape[0]
    s = np.clip(xq / h, 0.0, n - 1.0)
    i = np.clip(np.floor(s).astype(int) - 1, 0, n - 4)
    u = s - i
    col = np.broadcast_to(np.arange(values.shape[1]), xq.shape)
    f0, f1, f2, f3 = (values[i + k, col] for k in range(4))
    out = (-f0 * (u - 1) * (u - 2) * (u - 3) / 6 + f1 * u * (u - 2) * (u - 3) / 2
           - f2 * u * (u - 1) * (u - 3) / 2 + f3 * u * (u - 1) * (u - 2) / 6)
    return np.where(xq > 0, out, 0.0)


class TwoTimeLaw:
    """Evaluators for the (E_{t1}, E_{t2}) law at fixed beta, t1 < t2."""

    def __init__(self, params: StableParams | float, t1: float, t2: float, levels: int = 40,
                 points: int = 8, sigma_levels: int = 30):
        beta = params.beta if isinstance(params, StableParams) else float(params)
        if not 0 < t1 < t2:
            raise DomainError(f"need 0 < t1 < t2, got t1={t1}, t2={t2}")
        self.beta, self.t1, self.t2 = beta, float(t1), float(t2)
        self.delta = self.t2 - self.t1
        self.tab = density_table(beta)
        r = graded_rule(levels, points, 0.0, 0.0)
        # drop the two end pieces; they are integrated analytically
        self.v = t1 * r.nodes[points:-points]
        self.v_back = t1 * r.complement[points:-points]  # t1 - v without cancellation
        self.wv = t1 * r.weights[points:-points]
        self.e = t1 * 0.5 * 0.5 ** levels
        self.points = points
        self.sigma_levels = sigma_levels

    # -- building blocks -------------------------------------------------
    def sigma_rule(self, points=None):
        r = graded_rule(self.sigma_levels, points or self.points, -self.beta, 0.0)
        return self.delta * r.nodes, self.delta * r.complement, self.delta * r.weights

    def _g_matrix(self, x):
        return stable_g(self.tab, self.v_back[None, :], np.asarray(x, float)[:, None])

    def _end_pieces(self, x):
        x = np.asarray(x, float)
        g_left = stable_g(self.tab, np.full(x.shape, self.t1 - 0.5 * self.e), x)
        mass_right = self.tab.cdf1(self.e * x ** (-1.0 / self.beta))[0]  # P(D_x <= e)
        return g_left, mass_right

    def psi(self, sigma, x):
        """psi(sigma; x) as an array of shape (len(x), len(sigma))."""
        b, e = self.beta, self.e
        sigma = np.asarray(sigma, float)
        x = np.asarray(x, float)
        G = self._g_matrix(x)
        Phi = self.wv[:, None] * levy_phi(b, self.v[:, None] + sigma[None, :])
        g_left, mass_right = self._end_pieces(x)
        head = levy_bar(b, sigma) - levy_bar(b, sigma + e)
        tail = levy_phi(b, self.t1 - 0.5 * e + sigma)
        return G @ Phi + np.outer(g_left, head) + np.outer(mass_right, tail)

    def diagonal_density(self, x):
        """d(x): density on the line y = x (no regeneration in (t1, t2])."""
        b, e, D = self.beta, self.e, self.delta
        x = np.atleast_1d(np.asarray(x, float))
        out = np.zeros(x.shape)
        ok = x > 0
        xs = x[ok]
        G = self._g_matrix(xs)
        g_left, mass_right = self._end_pieces(xs)
        head = ((D + e) ** (1 - b) - D ** (1 - b)) / gamma(2 - b)
        out[ok] = G @ (self.wv * levy_bar(b, self.v + D)) + g_left * head + mass_right * levy_bar(b, self.t1 - 0.5 * e + D)
        return out

    def inverse_cdf(self, T, z):
        """P(E_T <= z), zero for z <= 0."""
        return self.tab.inverse_cdf(T, z)

    # -- pointwise densities ------------------------------------------------
    def off_diagonal_density(self, x, y):
        """f(x, y) on y > x > 0 (zero elsewhere), fast route."""
        x, y = np.broadcast_arrays(np.atleast_1d(np.asarray(x, float)), np.atleast_1d(np.asarray(y, float)))
        out = np.zeros(x.shape)
        ok = (x > 0) & (y > x)
        if not np.any(ok):
            return out
        s, sc, ws = self.sigma_rule()
        P = self.psi(s, x[ok])
        z = (y[ok] - x[ok])[:, None]
        H = self.tab.inverse_pdf(np.broadcast_to(sc, P.shape), np.broadcast_to(z, P.shape))
        out[ok] = (P * H) @ ws
        return out

    def triple_density(self, x: float, y: float, rel_tol: float = 1e-6) -> float:
        """f(x, y) from the three-fold integral, adaptively.

        int_0^{t1} dv g(t1 - v, x) int_0^Delta dsigma phi(v + sigma)
            int_0^{Delta - sigma} dw Phi[w, inf) g(Delta - sigma - w, y - x)
        """
        if not (y > x > 0):
            return 0.0
        b, t1, D, tab = self.beta, self.t1, self.delta, self.tab
        z = y - x

        def f(v, s, w):
            return (stable_g(tab, t1 - v, x) * levy_phi(b, v + s) * levy_bar(b, w)
                    * stable_g(tab, D - s - w, z))

        specs = [QuadratureSpec(rel_tol=rel_tol, left_exponent=-b),
                 QuadratureSpec(rel_tol=rel_tol, left_exponent=-b),
                 QuadratureSpec(rel_tol=rel_tol, left_exponent=-b)]
        region = [(0.0, t1), (0.0, D), (0.0, lambda v, s: D - s)]
        return integrate_nested(f, region, specs).value

    def diagonal_density_adaptive(self, x: float, rel_tol: float = 1e-10) -> float:
        """d(x) by adaptive quadrature in v (cross-check of the fixed rule)."""
        b, t1, D, tab = self.beta, self.t1, self.delta, self.tab
        r = integrate_1d(lambda v: stable_g(tab, t1 - v, x) * levy_bar(b, v + D), 0.0, t1,
                         QuadratureSpec(rel_tol=rel_tol))
        return r.value

    # -- marginals ----------------------------------------------------------
    def x_marginal(self, x, y_max: float = np.inf):
        """Density of E_{t1} at x from the two-time law, integrating y over (x, y_max)."""
        x = np.atleast_1d(np.asarray(x, float))
        s, sc, ws = self.sigma_rule()
        P = self.psi(s, x)
        if np.isinf(y_max):
            off = P @ ws
        else:
            H = self.inverse_cdf(np.broadcast_to(sc, P.shape), np.broadcast_to((y_max - x)[:, None], P.shape))
            off = (P * H) @ ws
        return self.diagonal_density(x) + off

    def _zeta_cut(self):
        # h(zeta; 1) is below 1e-18 beyond this point
        z = np.linspace(0.0, 60.0, 6001)[1:]
        h = self.tab.inverse_pdf(1.0, z)
        big = np.flatnonzero(h > 1e-18)
        return float(z[big[-1]]) if big.size else 60.0

    def y_marginal(self, y, x_step: float = 0.004, zeta_points: int = 48):
        """Density of E_{t2} at y: d(y) + int_0^y f(x, y) dx.

        With T = Delta - sigma and x = y - T^beta zeta the x-integral becomes
        an integral against h(zeta; 1), which stays regular as T -> 0; psi is
        tabulated on a uniform x grid and interpolated.
        """
        b = self.beta
        y = np.atleast_1d(np.asarray(y, float))
        s, sc, ws = self.sigma_rule()
        n = int(np.ceil(y.max() / x_step)) + 4
        xg = x_step * np.arange(n)
        table = np.zeros((n, s.size))
        table[1:] = self.psi(s, xg[1:])
        # psi(sigma; 0+) = phi(t1 + sigma), the limit as the first passage collapses
        table[0] = levy_phi(b, self.t1 + s)
        cut = self._zeta_cut()
        gx, gw = np.polynomial.legendre.leggauss(zeta_points)
        out = self.diagonal_density(y)
        for i, yi in enumerate(y):
            if yi <= 0:
                continue
            Tb = sc ** b
            top = np.minimum(yi / Tb, cut)  # (nsigma,)
            zeta = 0.5 * top[None, :] * (gx[:, None] + 1.0)
            wz = 0.5 * top[None, :] * gw[:, None]
            xq = yi - Tb[None, :] * zeta
            vals = _lagrange4(table, x_step, xq)
            hz = self.tab.inverse_pdf(1.0, zeta)
            out[i] += np.sum(ws * np.sum(wz * hz * vals, axis=0))
        return out

    # -- cells ----------------------------------------------------------------
    def _x_nodes(self, x_edges, y_edges, points):
        gx, gw = np.polynomial.legendre.leggauss(points)
        nodes, weights, cell = [], [], []
        for i in range(len(x_edges) - 1):
            a, c = x_edges[i], x_edges[i + 1]
            cuts = np.unique(np.concatenate([[a, c], y_edges[(y_edges > a) & (y_edges < c)]]))
            for lo, hi in zip(cuts[:-1], cuts[1:]):
                half = 0.5 * (hi - lo)
                nodes.append(0.5 * (lo + hi) + half * gx)
                weights.append(half * gw)
                cell.append(np.full(points, i))
        return np.concatenate(nodes), np.concatenate(weights), np.concatenate(cell)

    def cell_masses(self, x_edges, y_edges, x_points: int = 12, sigma_points: int | None = None):
        """Off-diagonal cell masses, diagonal mass per x-cell, and the mass outside the grid."""
        x_edges = np.asarray(x_edges, float)
        y_edges = np.asarray(y_edges, float)
        if x_edges[0] < 0:
            raise DomainError("x grid must start at or above 0")
        xn, wx, cell = self._x_nodes(x_edges, y_edges, x_points)
        s, sc, ws = self.sigma_rule(sigma_points)
        P = self.psi(s, xn) * ws[None, :]
        T = np.broadcast_to(sc, P.shape)
        C = np.empty((y_edges.size, xn.size))
        for j, yj in enumerate(y_edges):
            z = np.broadcast_to((yj - xn)[:, None], P.shape)
            C[j] = np.sum(P * self.inverse_cdf(T, z), axis=1)
        total = P.sum(axis=1)
        nx = x_edges.size - 1
        diff = (C[1:] - C[:-1]) * wx[None, :]  # (ny, nodes)
        masses = np.zeros((nx, y_edges.size - 1))
        for i in range(nx):
            masses[i] = diff[:, cell == i].sum(axis=1)
        d = self.diagonal_density(xn) * wx
        diag = np.bincount(cell, d, minlength=nx)
        # diagonal mass whose y = x falls outside the y range also leaves the grid
        xc = 0.5 * (x_edges[1:] + x_edges[:-1])
        on_grid = (xc > y_edges[0]) & (xc < y_edges[-1])
        outside_y = np.sum(wx * (total - C[-1] + C[0]))
        p_x_below = 1.0 - self.tab.cdf1(self.t1 * x_edges[0] ** (-1 / self.beta))[0] if x_edges[0] > 0 else 0.0
        p_x_above = self.tab.cdf1(self.t1 * x_edges[-1] ** (-1 / self.beta))[0]
        truncated = outside_y + float(diag[~on_grid].sum()) + p_x_below + p_x_above
        return np.clip(masses, 0.0, None), np.where(on_grid, diag, 0.0), float(truncated)


def joint_inverse_two_times(params: StableParams | float, t1: float, t2: float, x_edges, y_edges,
                            rel_tol: float = 1e-6, abs_tol: float = 1e-9) -> JointGrid:
    """Cell masses of the (E_{t1}, E_{t2}) law on a grid.

    Cells are evaluated with two rule resolutions; those whose masses differ
    by more than ``max(abs_tol, rel_tol * mass)`` are flagged.
    """
    if not t1 < t2:
        raise DomainError(f"joint_inverse_two_times needs t1 < t2, got t1={t1}, t2={t2}")
    law = TwoTimeLaw(params, t1, t2)
    x_edges = np.asarray(x_edges, float)
    y_edges = np.asarray(y_edges, float)
    for e in (x_edges, y_edges):
        if e.ndim != 1 or e.size < 2 or np.any(np.diff(e) <= 0):
            raise ParameterError("grid edges must be strictly increasing with at least 2 points")
    fine, diag, trunc = law.cell_masses(x_edges, y_edges, x_points=12, sigma_points=8)
    coarse, _, _ = law.cell_masses(x_edges, y_edges, x_points=8, sigma_points=6)
    flagged = np.abs(fine - coarse) > np.maximum(abs_tol, rel_tol * fine)
    area = np.outer(np.diff(x_edges), np.diff(y_edges))
    meta = {"beta": law.beta, "t1": law.t1, "t2": law.t2, "max_cell_discrepancy": float(np.max(np.abs(fine - coarse)))}
    return JointGrid(x_edges, y_edges, fine / area, diagonal_cells=diag, truncated_mass=trunc,
                     flagged=flagged, meta=meta)
