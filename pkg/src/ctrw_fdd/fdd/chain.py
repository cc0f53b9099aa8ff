"""n-time laws as products of one-step kernels, and Chapman-Kolmogorov compositions.

The n-time law of (X_{t_i-}, V_{t_i-}) factors as the one-time law at t_1
followed by P_{t_{i+1} - t_i}; :class:`FddChain` stores exactly that.  The
composition helpers evaluate P_{t1} P_{t2} (and Q_{t1} Q_{t2}) pointwise by
integrating over the intermediate state, for comparison with P_{t1+t2}.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import numpy as np
from scipy.interpolate import CubicHermiteSpline
from scipy.special import gamma, hyp2f1

from ..errors import DomainError, ParameterError, UnsupportedModelError
from ..quadrature import QuadratureSpec, graded_rule, integrate_batch
from ..renewal_kernels import ModelKind, ModelSpec, conditional_jump_tail
from ..stable_core import density_table
from .kernels import levy_bar, levy_phi, p_kernel, potential_convolution, q_kernel, stable_g, unit_cut
from .laws import Atom, KernelDensity, StateXV, StateYR
from .two_time import TwoTimeLaw, _lagrange4


@dataclass
class FddChain:
    """law(t_1) followed by the kernels P_{t_{i+1} - t_i} (a factored n-time law)."""
    model: ModelSpec
    times: tuple
    initial: KernelDensity
    steps: list = field(default_factory=list)  # (dt, state -> KernelDensity)

    def factor(self, i: int, state: StateXV) -> KernelDensity:
        dt, make = self.steps[i]
        return make(state)

    def continuous_density(self, states) -> float:
        """Density of the path (x_1, v_1), ..., (x_n, v_n) in which every step has renewed."""
        p = self.initial.part
        if p is None:
            return 0.0
        s0 = states[0]
        val = float(p(s0.v, s0.x)) if len(p.free) == 2 else float(p(s0.v))
        for i, (a, b) in enumerate(zip(states[:-1], states[1:])):
            k = self.factor(i, a)
            q = k.part
            val *= float(q(b.v, b.x)) if len(q.free) == 2 else float(q(b.v))
        return val


def fdd_chain(model: ModelSpec, chi: float, tau: float, times) -> FddChain:
    times = tuple(float(t) for t in times)
    if not times:
        raise ParameterError("times must not be empty")
    if times[0] < tau or any(b <= a for a, b in zip(times[:-1], times[1:])):
        raise DomainError("times must satisfy tau <= t_1 < ... < t_n")
    if model.kind is ModelKind.PURE_DRIFT:
        raise UnsupportedModelError("PureDrift has no transition density")
    T = times[0] - tau
    if T == 0:
        initial = KernelDensity(("x", "v"), [Atom((chi, 0.0), 1.0)], None, "point mass at (chi, 0)")
    else:
        initial = p_kernel(model, T, StateXV(chi, 0.0))
    steps = []
    for a, b in zip(times[:-1], times[1:]):
        dt = b - a
        steps.append((dt, lambda s, dt=dt: p_kernel(model, dt, s)))
    return FddChain(model, times, initial, steps)


# -- shared pieces ----------------------------------------------------------

class UnitPotential:
    """m(zeta) = g(1, zeta) and its running integral M(z) = int_0^z m.

    g(T, u) du = T^(beta-1) m(zeta) dzeta under u = T^beta zeta, so M turns
    spatial integrals of g into a table lookup.  M(inf) = 1/Gamma(beta).
    """

    def __init__(self, beta: float, step: float = 0.01):
        self.beta = beta
        self.tab = density_table(beta)
        self.cut = unit_cut(beta)
        z = np.arange(0.0, self.cut + 0.5 * step, step)
        gx, gw = np.polynomial.legendre.leggauss(10)
        lo, hi = z[:-1], z[1:]
        nodes = 0.5 * (lo + hi)[:, None] + 0.5 * (hi - lo)[:, None] * gx
        inc = (self.density(nodes) * gw).sum(axis=1) * 0.5 * (hi - lo)
        cum = np.concatenate([[0.0], np.cumsum(inc)])
        self.total = 1.0 / gamma(beta)
        self._spline = CubicHermiteSpline(z, cum, self.density(z))

    def density(self, z):
        z = np.asarray(z, float)
        return stable_g(self.tab, np.ones(z.shape), z)

    def cumulative(self, z):
        z = np.asarray(z, float)
        out = np.where(z >= self.cut, self.total, 0.0)
        mid = (z > 0) & (z < self.cut)
        out[mid] = self._spline(z[mid])
        return out


def age_convolution(beta, v1, L):
    """Psi(v1, L) = int_0^L s^(-beta) phi(v1 + L - s) ds in closed form (hypergeometric)."""
    v1, L = np.broadcast_arrays(np.asarray(v1, float), np.asarray(L, float))
    c = v1 + L
    z = L / c
    # Euler transform: the (1 - z)^(-beta) = (c / v1)^beta singularity is pulled out exactly
    return (beta / gamma(1 - beta) * np.exp(-beta * np.log(c) - beta * np.log(v1) + (1 - beta) * np.log(z))
            / (1 - beta) * hyp2f1(1.0, 1 - 2 * beta, 2 - beta, z))


def example1_two_time_cells(beta: float, t1: float, t2: float, x_edges, y_edges, x_points: int = 12):
    """(E_{t1}, E_{t2}) cell masses from the chain law(t1) (x) P_{t2-t1} for Example1 from (0, 0).

    Integrates the one-time density g(t1 - v, x) Phi[v, inf) against the
    kernel's atom (diagonal) and its density (integrated over the new age in
    closed form, over the new position by the running integral of g).
    Returns (cell masses, diagonal mass per x-cell).
    """
    if not 0 < t1 < t2:
        raise DomainError("need 0 < t1 < t2")
    D = t2 - t1
    tab = density_table(beta)
    pot = UnitPotential(beta)
    x_edges = np.asarray(x_edges, float)
    y_edges = np.asarray(y_edges, float)
    law = TwoTimeLaw(beta, t1, t2)
    xn, wx, cell = law._x_nodes(x_edges, y_edges, x_points)
    r = graded_rule(40, 8, -beta, 0.0)
    v, vb, wv = t1 * r.nodes, t1 * r.complement, t1 * r.weights
    A = stable_g(tab, vb[None, :], xn[:, None]) * wv / gamma(1 - beta)  # g(t1-v, x) v^beta Phi[v,inf) dv
    rt = graded_rule(30, 8, beta - 1, 0.0)
    T, Tb, wT = D * rt.nodes, D * rt.complement, D * rt.weights
    B = age_convolution(beta, v[:, None], Tb[None, :])  # Psi(v, D - T)
    AB = A @ B
    scale = T ** (beta - 1) * wT
    nx = x_edges.size - 1
    C = np.empty((y_edges.size, xn.size))
    Tbeta = T ** beta
    for j, yj in enumerate(y_edges):
        u = np.clip(yj - xn, 0.0, None)
        C[j] = np.sum(AB * scale * pot.cumulative(u[:, None] / Tbeta[None, :]), axis=1)
    diff = (C[1:] - C[:-1]) * wx
    masses = np.zeros((nx, y_edges.size - 1))
    for i in range(nx):
        masses[i] = diff[:, cell == i].sum(axis=1)
    # diagonal: the kernel's atom, weight (v/(v+D))^beta
    tail = np.exp(-beta * np.log(v + D)) / gamma(1 - beta)
    diag_density = stable_g(tab, vb[None, :], xn[:, None]) @ (wv * tail)
    diag = np.bincount(cell, diag_density * wx, minlength=nx)
    return masses, diag


# -- Chapman-Kolmogorov compositions -----------------------------------------

def _psi_table(law: TwoTimeLaw, sigma, x_max, x_step):
    n = int(np.ceil(x_max / x_step)) + 4
    xg = x_step * np.arange(n)
    table = np.zeros((n, sigma.size))
    table[1:] = law.psi(sigma, xg[1:])
    table[0] = levy_phi(law.beta, law.t1 + sigma)
    return table


def compose_p_example1(beta: float, t1: float, t2: float, x, v, x_step: float = 0.004,
                       zeta_points: int = 48):
    """(P_{t1} P_{t2})(0, 0; x, v) density for Example1, at points (x, v) with x > 0.

    v > t2: the second step did not renew, density p_{t1}(x, v - t2) ((v - t2)/v)^beta.
    v < t2: v^(-beta)/Gamma(1-beta) J(x, t2 - v) with
    J(x, T) = int_0^T dsigma (T - sigma)^(beta-1) int dzeta m(zeta) psi(sigma; x - (T - sigma)^beta zeta).
    """
    x, v = np.broadcast_arrays(np.atleast_1d(np.asarray(x, float)), np.atleast_1d(np.asarray(v, float)))
    tab = density_table(beta)
    pot = UnitPotential(beta)
    law = TwoTimeLaw(beta, t1, t1 + t2)
    out = np.zeros(x.shape)
    late = (v > t2) & (v < t1 + t2)
    if np.any(late):
        vv = v[late] - t2
        out[late] = stable_g(tab, t1 - vv, x[late]) * levy_bar(beta, vv) * (vv / v[late]) ** beta
    early = (v > 0) & (v < t2) & (x > 0)
    if not np.any(early):
        return out
    gx, gw = np.polynomial.legendre.leggauss(zeta_points)
    r = graded_rule(30, 8, -beta, beta - 1)
    idx = np.flatnonzero(early)
    x_max = x[early].max()
    for Tval in np.unique(t2 - v[early]):
        s, sc, ws = Tval * r.nodes, Tval * r.complement, Tval * r.weights
        table = _psi_table(law, s, x_max, x_step)
        scb = sc ** beta
        for k in idx[t2 - v[idx] == Tval]:
            top = np.minimum(x[k] / scb, pot.cut)
            zeta = 0.5 * top[None, :] * (gx[:, None] + 1.0)
            wz = 0.5 * top[None, :] * gw[:, None]
            vals = _lagrange4(table, x_step, x[k] - scb[None, :] * zeta)
            J = np.sum(ws * sc ** (beta - 1) * np.sum(wz * pot.density(zeta) * vals, axis=0))
            out[k] = v[k] ** -beta / gamma(1 - beta) * J
    return out


def compose_q_example1(beta: float, t1: float, t2: float, y, r, x_step: float = 0.004,
                       zeta_step: float = 0.02, zeta_points: int = 48):
    """(Q_{t1} Q_{t2})(0, 0; y, r) density for Example1 at points (y > 0, r > 0).

    Frozen part psi_{t1}(r + t2; y); renewed part
    int_0^{t2} dsigma T^beta int dzeta psi_{t1}(sigma; y - T^beta zeta) Qt(zeta, r, T), T = t2 - sigma,
    where Qt(zeta, r, T) = int_0^1 g(omega, zeta) phi(r + T (1 - omega)) domega.
    """
    y, r = np.broadcast_arrays(np.atleast_1d(np.asarray(y, float)), np.atleast_1d(np.asarray(r, float)))
    tab = density_table(beta)
    pot = UnitPotential(beta)
    law = TwoTimeLaw(beta, t1, t1 + t2)
    out = np.zeros(y.shape)
    ok = (y > 0) & (r > 0)
    if not np.any(ok):
        return out
    out[ok] = [law.psi(np.array([ri + t2]), np.array([yi]))[0, 0] for yi, ri in zip(y[ok], r[ok])]
    rs = graded_rule(24, 6, -beta, beta)
    s, T, ws = t2 * rs.nodes, t2 * rs.complement, t2 * rs.weights
    psi_tab = _psi_table(law, s, y[ok].max(), x_step)
    ro = graded_rule(40, 8, 0.0, 0.0)
    om, omc, wom = ro.nodes, ro.complement, ro.weights
    zg = zeta_step * np.arange(int(np.ceil(pot.cut / zeta_step)) + 4)
    Gz = stable_g(tab, om[:, None], zg[None, :])  # g(omega, zeta), (n_omega, n_zeta)
    gx, gw = np.polynomial.legendre.leggauss(zeta_points)
    Tb = T ** beta
    top = lambda yi: np.minimum(yi / Tb, pot.cut)
    for ri in np.unique(r[ok]):
        Phi = wom[:, None] * levy_phi(beta, ri + T[None, :] * omc[:, None])  # (n_omega, n_sigma)
        Qt = Gz.T @ Phi  # (n_zeta, n_sigma)
        # zeta = 0: all of D_0 = 0, so g(., 0) is a point mass at omega = 0
        Qt[0] = levy_phi(beta, ri + T)
        for k in np.flatnonzero(ok & (r == ri)):
            tp = top(y[k])
            zeta = 0.5 * tp[None, :] * (gx[:, None] + 1.0)
            wz = 0.5 * tp[None, :] * gw[:, None]
            vals = _lagrange4(psi_tab, x_step, y[k] - Tb[None, :] * zeta)
            q = _lagrange4(Qt, zeta_step, zeta + 1e-300)
            out[k] += np.sum(ws * Tb * np.sum(wz * vals * q, axis=0))
    return out


def _adaptive_batch(f, a, b, spec):
    res = integrate_batch(f, a, b, spec)
    return res.values


def compose_p_example2(beta: float, t1: float, t2: float, v0: float, v):
    """Density in v of (P_{t1} P_{t2})(x0, v0; .) for Example2 (position slaved to the age).

    Uses the implemented one-step kernels for both steps.
    """
    v = np.atleast_1d(np.asarray(v, float))
    model = ModelSpec.example2(beta)
    k1 = p_kernel(model, t1, StateXV(0.0, v0))
    f1 = k1.part.density
    out = np.zeros(v.shape)

    def f2(vp, target):
        # density of P_{t2}(., vp; target) at the age target, vectorised in vp
        res = np.zeros(vp.shape)
        dead = vp == 0
        if np.any(dead):
            res[dead] = levy_bar(beta, target[dead]) * np.where(target[dead] < t2, np.abs(t2 - target[dead]) ** (beta - 1) / gamma(beta), 0.0)
        live = ~dead
        if np.any(live):
            vv, tt = vp[live], target[live]
            res[live] = (vv / tt) ** beta * potential_convolution(beta, t2 - tt, vv)
        return res

    ok = (v > 0) & (v < t2)
    if np.any(ok):
        vt = v[ok]
        spec = QuadratureSpec(rel_tol=1e-9, left_exponent=-beta)
        cont = _adaptive_batch(lambda vp, i: f1(vp) * f2(vp, vt[i]), np.zeros(vt.size), np.full(vt.size, t1), spec)
        atom_part = 0.0
        if v0 > 0:
            w1 = conditional_jump_tail(model.stable, v0, t1)
            atom_part = w1 * f2(np.full(vt.size, v0 + t1), vt)
        out[ok] = cont + atom_part
    late = (v > t2) & (v < t2 + t1)
    if np.any(late):
        vp = v[late] - t2
        out[late] = f1(vp) * (vp / v[late]) ** beta
    return out


def compose_q_example2(beta: float, t1: float, t2: float, r0: float, r):
    """Density in r of (Q_{t1} Q_{t2})(y0, r0; .) for Example2, using the implemented kernels."""
    r = np.atleast_1d(np.asarray(r, float))
    model = ModelSpec.example2(beta)
    k1 = q_kernel(model, t1, StateYR(0.0, r0))
    out = np.zeros(r.shape)
    if k1.part is None:
        # frozen through the first step: (y0, r0 - t1), then one step of t2
        k2 = q_kernel(model, t2, StateYR(0.0, k1.atoms[0].location[1]))
        if k2.part is not None:
            out = k2.part(r)
        return out
    f1 = k1.part.density

    def f2(rp, target):
        # renewed branch of Q_{t2} from (., rp) with rp <= t2: density potential_convolution(t2 - rp, target)
        res = np.zeros(rp.shape)
        live = rp < t2
        res[live] = potential_convolution(beta, t2 - rp[live], target[live])
        return res

    spec = QuadratureSpec(rel_tol=1e-9, left_exponent=-beta, right_exponent=beta)
    cont = _adaptive_batch(lambda rp, i: f1(rp) * f2(rp, r[i]), np.zeros(r.size), np.full(r.size, t2), spec)
    return cont + f1(r + t2)
