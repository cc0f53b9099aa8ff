"""One-time joint law and the homogeneous kernels P_t, Q_t for the model catalogue.

Example1 densities are built from the stable density g(t, u) of D_u (via the
spline table); Example2 densities reduce to products of powers because the
spatial coordinate is slaved to time.  Integrals that remain inside a kernel
(a renewal convolution over the time of the first regeneration) are done per
point with geometrically graded rules sized to that point's peak widths.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.special import gamma, gammaln

from ..errors import DomainError, UnsupportedModelError
from ..quadrature import QuadratureSpec, geometric_rule
from ..renewal_kernels import ModelKind, ModelSpec, conditional_jump_tail
from ..stable_core import density_table
from .laws import Atom, DensityPart, KernelDensity, StateXV, StateYR

_CHUNK = 2048
_INF = np.inf


def stable_g(tab, T, u):
    """g(T, u) for arrays, zero off T > 0, u > 0."""
    T, u = np.broadcast_arrays(np.asarray(T, float), np.asarray(u, float))
    out = np.zeros(T.shape)
    ok = (T > 0) & (u > 0)
    if np.any(ok):
        out[ok] = tab.pdf(T[ok], u[ok])
    return out


def levy_phi(beta, w):
    w = np.asarray(w, float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(w > 0, np.exp(np.log(beta) - (beta + 1) * np.log(np.where(w > 0, w, 1.0))
                                      - gammaln(1 - beta)), 0.0)


def levy_bar(beta, v):
    v = np.asarray(v, float)
    with np.errstate(divide="ignore"):
        return np.where(v > 0, np.where(v > 0, v, 1.0) ** -beta / gamma(1 - beta), np.inf)


@lru_cache(maxsize=None)
def unit_cut(beta: float) -> float:
    """zeta beyond which g(1, zeta) < 1e-18 of its peak.

    g(s, u) = g(1, u s^-beta) / s, so g(s, .) lives on [0, s^beta unit_cut].
    """
    z = np.arange(0.0, 200.0, 0.01)
    m = stable_g(density_table(beta), np.ones(z.shape), z)
    big = np.flatnonzero(m > 1e-18 * m.max())
    return float(z[min(big[-1] + 2, z.size - 1)])


def _chunked(fn, n, *arrays):
    out = np.empty(n)
    for s in range(0, n, _CHUNK):
        out[s:s + _CHUNK] = fn(*[a[s:s + _CHUNK] for a in arrays])
    return out


def renewal_convolution(tab, L, u, c0):
    """int_0^L g(s, u) phi(c0 + L - s) ds, row-wise.

    The g factor peaks at s ~ u^(1/beta), the phi factor at s -> L on scale c0;
    both ends are graded down to a hundredth of those widths.
    """
    L, u, c0 = [np.ravel(a).astype(float) for a in np.broadcast_arrays(L, u, c0)]
    out = np.zeros(L.size)
    ok = (L > 0) & (u > 0) & (c0 > 0)
    if not np.any(ok):
        return out
    b = tab.beta

    def rows(L, u, c0):
        with np.errstate(over="ignore"):
            el = 0.01 * u ** (1.0 / b) / L
        r = geometric_rule(el, 0.01 * c0 / L)
        s = L[:, None] * r.nodes
        back = c0[:, None] + L[:, None] * r.complement
        return L * np.sum(r.weights * stable_g(tab, s, u[:, None]) * levy_phi(b, back), axis=1)

    out[ok] = _chunked(rows, int(ok.sum()), L[ok], u[ok], c0[ok])
    return out


def potential_convolution(beta, L, c0):
    """int_0^L s^(beta-1)/Gamma(beta) phi(c0 + L - s) ds, row-wise (Example2 analogue)."""
    L, c0 = [np.ravel(a).astype(float) for a in np.broadcast_arrays(L, c0)]
    out = np.zeros(L.size)
    ok = (L > 0) & (c0 > 0)
    if not np.any(ok):
        return out

    def rows(L, c0):
        r = geometric_rule(np.full(L.size, 0.5), 0.01 * c0 / L, left=beta - 1.0)
        s = L[:, None] * r.nodes
        back = c0[:, None] + L[:, None] * r.complement
        f = np.exp((beta - 1) * np.log(s) - gammaln(beta)) * levy_phi(beta, back)
        return L * np.sum(r.weights * f, axis=1)

    out[ok] = _chunked(rows, int(ok.sum()), L[ok], c0[ok])
    return out


def _spec(left=None, right=None, tail=None):
    return QuadratureSpec(left_exponent=left, right_exponent=right, tail_exponent=tail)


def _check_model(model: ModelSpec):
    if model.kind is ModelKind.PURE_DRIFT:
        raise UnsupportedModelError("PureDrift has no transition density (deterministic motion)")


def joint_xyvr(model: ModelSpec, chi: float, tau: float, t: float) -> KernelDensity:
    """Law of (X_{t-}, Y_t, V_{t-}, R_t) for the process started at (chi, tau)."""
    if not t >= tau:
        raise DomainError(f"joint_xyvr needs t >= tau, got t={t}, tau={tau}")
    coords = ("x", "y", "v", "r")
    T = float(t - tau)
    if T == 0:
        return KernelDensity(coords, [Atom((chi, chi, 0.0, 0.0), 1.0)], None, "point mass at (chi, chi, 0, 0)")
    if model.kind is ModelKind.PURE_DRIFT:
        return KernelDensity(coords, [Atom((chi + T, chi + T, 0.0, 0.0), 1.0)], None,
                             "point mass at (chi + t - tau, chi + t - tau, 0, 0)")
    b = model.beta
    if model.kind is ModelKind.EXAMPLE1:
        tab = density_table(b)

        def dens(v, r, x):
            return stable_g(tab, T - v, x - chi) * levy_phi(b, v + r)

        cut = unit_cut(b)
        part = DensityPart(("v", "r", "x"), dens, lambda v, r, x: (x, x, v, r),
                           ((0.0, T), (0.0, _INF), (chi, _INF)),
                           (_spec(-b, b - 1), _spec(tail=b), _spec()),
                           region=((0.0, T), (0.0, _INF), (chi, lambda v, r: chi + np.abs(T - v) ** b * cut)))
        return KernelDensity(coords, [], part, "density on {y = x > chi, 0 < v < t - tau, r > 0}")

    def dens2(v, r):
        with np.errstate(divide="ignore"):
            return np.where(v < T, np.abs(T - v) ** (b - 1) / gamma(b), 0.0) * levy_phi(b, v + r)

    part = DensityPart(("v", "r"), dens2, lambda v, r: (chi + T - v, chi + T + r, v, r),
                       ((0.0, T), (0.0, _INF)), (_spec(-b, b - 1), _spec(tail=b)))
    return KernelDensity(coords, [], part, "density on {x = chi + t - tau - v, y = chi + t - tau + r}")


def p_kernel(model: ModelSpec, t: float, start: StateXV) -> KernelDensity:
    """P_t(x0, v0; dx, dv), the transition law of (X_{t-}, V_{t-})."""
    _check_model(model)
    if not t > 0:
        raise DomainError(f"p_kernel needs t > 0, got {t}")
    b = model.beta
    x0, v0 = start.x, start.v
    coords = ("x", "v")
    atoms = []
    if v0 > 0:
        atoms.append(Atom((x0, v0 + t), float(conditional_jump_tail(model.stable, v0, t))))
    if model.kind is ModelKind.EXAMPLE1:
        tab = density_table(b)
        if v0 == 0:
            def dens(v, x):
                return stable_g(tab, t - v, x - x0) * levy_bar(b, v)
            specs = (_spec(-b, b - 1), _spec())
        else:
            def dens(v, x):
                with np.errstate(divide="ignore"):
                    pre = np.where(v > 0, (v0 / np.where(v > 0, v, 1.0)) ** b, 0.0)
                return pre * renewal_convolution(tab, t - v, x - x0, np.full(np.shape(v), v0)).reshape(np.shape(v))
            specs = (_spec(-b), _spec())
        cut = unit_cut(b)
        part = DensityPart(("v", "x"), dens, lambda v, x: (x, v), ((0.0, t), (x0, _INF)), specs,
                           region=((0.0, t), (x0, lambda v: x0 + np.abs(t - v) ** b * cut)))
        desc = "density on {x > x0, 0 < v < t}"
    else:
        shift = x0 + v0 + t
        if v0 == 0:
            def dens(v):
                with np.errstate(divide="ignore"):
                    return levy_bar(b, v) * np.where(v < t, np.abs(t - v) ** (b - 1) / gamma(b), 0.0)
            specs = (_spec(-b, b - 1),)
        else:
            def dens(v):
                with np.errstate(divide="ignore"):
                    pre = np.where(v > 0, (v0 / np.where(v > 0, v, 1.0)) ** b, 0.0)
                return pre * potential_convolution(b, t - v, np.full(np.shape(v), v0)).reshape(np.shape(v))
            specs = (_spec(-b),)
        part = DensityPart(("v",), dens, lambda v: (shift - v, v), ((0.0, t),), specs)
        desc = "density on the line {x = x0 + v0 + t - v, 0 < v < t}"
    if atoms:
        desc = f"atom at (x0, v0 + t); {desc}"
    return KernelDensity(coords, atoms, part, desc)


def q_kernel(model: ModelSpec, t: float, start: StateYR) -> KernelDensity:
    """Q_t(y0, r0; dy, dr), the transition law of (Y_t, R_t).

    Frozen branch iff r0 > t (remaining lifetime just runs down); otherwise the
    process regenerates at r0 and the law is Q_{t-r0}(y0, 0; .).  At r0 = t the
    two coincide (Q_0 is the identity).
    """
    _check_model(model)
    if not t > 0:
        raise DomainError(f"q_kernel needs t > 0, got {t}")
    b = model.beta
    y0, r0 = start.y, start.r
    coords = ("y", "r")
    if r0 > t:
        return KernelDensity(coords, [Atom((y0, r0 - t), 1.0)], None, "atom at (y0, r0 - t)")
    T = t - r0
    if T == 0:
        return KernelDensity(coords, [Atom((y0, 0.0), 1.0)], None, "atom at (y0, 0)")
    if model.kind is ModelKind.EXAMPLE1:
        tab = density_table(b)

        def dens(r, y):
            return renewal_convolution(tab, np.full(np.shape(r), T), y - y0, r).reshape(np.shape(r))

        part = DensityPart(("r", "y"), dens, lambda r, y: (y, r), ((0.0, _INF), (y0, _INF)),
                           (_spec(left=-b, tail=b), _spec()),
                           region=((0.0, _INF), (y0, y0 + T ** b * unit_cut(b))))
        return KernelDensity(coords, [], part, "density on {y > y0, r > 0}")

    def dens(r):
        return potential_convolution(b, np.full(np.shape(r), T), r).reshape(np.shape(r))

    part = DensityPart(("r",), dens, lambda r: (y0 + T + r, r), ((0.0, _INF),),
                       (_spec(left=-b, tail=b),))
    return KernelDensity(coords, [], part, "density on the line {y = y0 + (t - r0) + r, r > 0}")


def inverse_subordinator_law(beta: float, t: float) -> KernelDensity:
    """One-time law of E_t as a KernelDensity on (0, inf)."""
    if not t > 0:
        raise DomainError(f"need t > 0, got {t}")
    tab = density_table(beta)
    part = DensityPart(("x",), lambda x: tab.inverse_pdf(t, x), lambda x: (x,), ((0.0, _INF),),
                       (_spec(tail=1 + 1 / beta),))
    return KernelDensity(("x",), [], part, "density on x > 0")
