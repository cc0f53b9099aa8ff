"""Adaptive Gauss-Kronrod integration with endpoint-singularity substitutions.

The work-horse is :func:`integrate_batch`, which integrates many independent
integrals at once.  Each integral keeps its own adaptive partition, but every
refinement round evaluates the integrand once on the concatenated abscissas of
all live intervals, so numpy does the looping.  :func:`integrate_1d` and
:func:`integrate_nested` are thin layers over it.

Endpoint behaviour is declared, not detected:

* ``left_exponent=a`` / ``right_exponent=a`` promise ``f ~ (x-lo)^a`` or
  ``f ~ (hi-x)^a``; the substitution ``x = lo + (hi-lo) z^(1/(1+a))`` (mirrored on
  the right) removes the singularity before refinement starts.
* ``tail_exponent=g`` promises ``f ~ x^(-1-g)`` on a right-infinite range and
  maps ``x = lo + (1-z)^(-1/g) - 1``.  Without it the map is ``x = lo + z/(1-z)``,
  which is only appropriate for integrands decaying faster than any power.

Abscissae are handed to ``f`` as absolute values, so a singular endpoint at a
large ``|b|`` is only resolved to ``spacing(b)``.  Nodes that land within a few
ulps of such an endpoint are counted in full towards the error estimate, which
keeps the estimate honest; for full accuracy put the singular point at 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.special import roots_jacobi

from .errors import IntegrationError, ParameterError

# QUADPACK qk15 abscissae/weights on [-1, 1].
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG7 = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])  # 15 nodes, ascending
KRONROD = np.concatenate([_WGK[:-1], _WGK[::-1]])
GAUSS = np.zeros(15)
GAUSS[1:7:2] = _WG7[:3]
GAUSS[9:15:2] = _WG7[:3][::-1]
GAUSS[7] = _WG7[3]

_EPS = np.finfo(float).eps
_TINY = np.finfo(float).tiny

# piece kinds for the substitution table
_LINEAR, _LEFT, _RIGHT, _INF = 0, 1, 2, 3


@dataclass(frozen=True)
class QuadratureSpec:
    rel_tol: float = 1e-7
    abs_tol: float = 0.0
    max_subdivisions: int = 200
    left_exponent: float | None = None
    right_exponent: float | None = None
    tail_exponent: float | None = None

    def __post_init__(self):
        if not (self.rel_tol > 0 or self.abs_tol > 0):
            raise ParameterError("QuadratureSpec needs rel_tol > 0 or abs_tol > 0")
        if self.rel_tol < 0 or self.abs_tol < 0:
            raise ParameterError("tolerances must be non-negative")
        if self.max_subdivisions < 1:
            raise ParameterError("max_subdivisions must be >= 1")
        for name in ("left_exponent", "right_exponent"):
            a = getattr(self, name)
            if a is not None and not a > -1:
                raise ParameterError(f"{name} must exceed -1 for integrability, got {a}")
        if self.tail_exponent is not None and not self.tail_exponent > 0:
            raise ParameterError("tail_exponent must be positive")

    def replace(self, **changes) -> "QuadratureSpec":
        fields = {k: getattr(self, k) for k in self.__dataclass_fields__}
        fields.update(changes)
        return QuadratureSpec(**fields)


@dataclass
class QuadratureResult:
    value: float
    error_estimate: float
    evaluations: int
    converged: bool


@dataclass
class BatchResult:
    values: np.ndarray
    errors: np.ndarray
    evaluations: int
    converged: np.ndarray
    aux: np.ndarray | None = None  # integral of the auxiliary integrand, if f returned one

    def __getitem__(self, i) -> QuadratureResult:
        return QuadratureResult(float(self.values[i]), float(self.errors[i]),
                                self.evaluations, bool(self.converged[i]))


def _pieces(a, b, spec):
    """Split each integral into substitution pieces on z in [0, 1]."""
    n = a.size
    owner = np.arange(n)
    infinite = np.isinf(b)
    if np.any(infinite) and spec.right_exponent is not None:
        raise ParameterError("right_exponent is meaningless on an infinite range; use tail_exponent")
    kinds, lo, hi, own = [], [], [], []

    def add(kind, lo_, hi_, own_):
        kinds.append(np.full(own_.size, kind))
        lo.append(lo_)
        hi.append(hi_)
        own.append(own_)

    fin = ~infinite
    if np.any(infinite):
        add(_INF, a[infinite], b[infinite], owner[infinite])
    if np.any(fin):
        af, bf, of = a[fin], b[fin], owner[fin]
        left, right = spec.left_exponent is not None, spec.right_exponent is not None
        if left and right:
            m = 0.5 * (af + bf)
            add(_LEFT, af, m, of)
            add(_RIGHT, m, bf, of)
        elif left:
            add(_LEFT, af, bf, of)
        elif right:
            add(_RIGHT, af, bf, of)
        else:
            add(_LINEAR, af, bf, of)
    return (np.concatenate(kinds), np.concatenate(lo), np.concatenate(hi),
            np.concatenate(own))


class _Substitution:
    def __init__(self, kinds, lo, hi, spec):
        self.kinds, self.lo, self.hi = kinds, lo, hi
        self.p_left = 1.0 / (1.0 + spec.left_exponent) if spec.left_exponent is not None else 1.0
        self.p_right = 1.0 / (1.0 + spec.right_exponent) if spec.right_exponent is not None else 1.0
        self.tail = spec.tail_exponent

    def __call__(self, z, piece):
        """Return abscissae, Jacobian and the offset of each abscissa from the
        endpoint its power map is anchored at (inf where there is none)."""
        k = self.kinds[piece]
        a = self.lo[piece]
        b = self.hi[piece]
        w = b - a
        x = np.empty_like(z)
        jac = np.empty_like(z)
        off = np.full_like(z, np.inf)

        m = k == _LINEAR
        if np.any(m):
            x[m] = a[m] + w[m] * z[m]
            jac[m] = w[m]
        m = k == _LEFT
        if np.any(m):
            p = self.p_left
            zp = z[m] ** p
            x[m] = a[m] + w[m] * zp
            jac[m] = w[m] * p * zp / z[m]
            off[m] = w[m] * zp / np.maximum(np.spacing(np.abs(a[m])), _TINY)
        m = k == _RIGHT
        if np.any(m):
            p = self.p_right
            oz = 1.0 - z[m]
            zp = oz ** p
            x[m] = b[m] - w[m] * zp
            jac[m] = w[m] * p * zp / oz
            off[m] = w[m] * zp / np.maximum(np.spacing(np.abs(b[m])), _TINY)
        m = k == _INF
        if np.any(m):
            p = self.p_left
            s = z[m] ** p
            ds = p * s / z[m]
            om = 1.0 - s
            if self.tail is None:
                x[m] = a[m] + s / om
                jac[m] = ds / om**2
            else:
                g = self.tail
                x[m] = a[m] + np.expm1(-np.log(om) / g)
                jac[m] = ds * om ** (-1.0 / g - 1.0) / g
        return x, jac, off


def _gk15(h, lo, hi, piece):
    centre = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    z = centre[:, None] + half[:, None] * NODES[None, :]
    fx, off, aux = h(z.ravel(), np.repeat(piece, 15))
    fx = fx.reshape(-1, 15)
    auxk = None if aux is None else aux.reshape(-1, 15) @ KRONROD * half
    # abscissae within a few ulps of a singular endpoint: f is evaluated at a
    # rounded distance, so the interval's value is not trustworthy
    near = off.reshape(-1, 15) < 16.0
    blurred = near.all(axis=1)
    resk = fx @ KRONROD * half
    resg = fx @ GAUSS * half
    resabs = np.abs(fx) @ KRONROD * half
    mean = 0.5 * (fx @ KRONROD)
    resasc = np.abs(fx - mean[:, None]) @ KRONROD * half
    err = np.abs(resk - resg)
    scaled = np.where(resasc > 0, resasc * np.minimum(1.0, (200.0 * err / np.where(resasc > 0, resasc, 1.0)) ** 1.5), err)
    err = np.where((resasc > 0) & (err > 0), scaled, err)
    err = np.where(resabs > _TINY / (50 * _EPS), np.maximum(50 * _EPS * resabs, err), err)
    err = err + (np.abs(fx) * near) @ KRONROD * half
    return resk, err, blurred, auxk


def integrate_batch(f: Callable, a, b, spec: QuadratureSpec | None = None) -> BatchResult:
    """Integrate ``f(x, i)`` over ``[a[i], b[i]]`` for every ``i`` simultaneously.

    ``f`` receives a flat array of abscissae ``x`` and a same-shaped integer array
    naming the integral each abscissa belongs to; it must return a flat array of
    integrand values.  ``b`` may contain ``+inf``.  If ``f`` returns a pair
    ``(values, aux)``, ``aux`` is integrated with the final rule alongside
    (it does not steer refinement) and reported in ``BatchResult.aux``.
    """
    spec = spec or QuadratureSpec()
    a = np.atleast_1d(np.asarray(a, dtype=float)).ravel()
    b = np.atleast_1d(np.asarray(b, dtype=float)).ravel()
    a, b = np.broadcast_arrays(a, b)
    a, b = a.copy(), b.copy()
    n = a.size
    if n == 0:
        return BatchResult(np.zeros(0), np.zeros(0), 0, np.ones(0, bool))
    if np.any(~np.isfinite(a)) or np.any(np.isnan(b)) or np.any(b == -np.inf):
        raise ParameterError("lower bounds must be finite and upper bounds finite or +inf")
    sign = np.where(b < a, -1.0, 1.0)
    a, b = np.minimum(a, b), np.maximum(a, b)
    empty = a == b

    kinds, plo, phi, owner = _pieces(a, b, spec)
    subst = _Substitution(kinds, plo, phi, spec)
    n_eval = 0

    def h(z, piece):
        nonlocal n_eval
        x, jac, off = subst(z, piece)
        idx = owner[piece]
        # a power map can round an abscissa onto the singular endpoint; the
        # Jacobian vanishes there faster than f blows up, so the node adds nothing
        inside = (jac > 0) & (x > a[idx]) & (x < b[idx])
        out = np.zeros_like(x)
        if not np.all(inside):
            x, idx, jac = x[inside], idx[inside], jac[inside]
        fx = f(x, idx)
        aux_out = None
        if isinstance(fx, tuple):
            fx, aux = fx
            aux_out = np.zeros_like(out)
            aux_out[inside] = np.asarray(aux, dtype=float) * jac
        fx = np.asarray(fx, dtype=float)
        n_eval += x.size
        bad = ~np.isfinite(fx)
        if np.any(bad):
            j = int(np.flatnonzero(bad)[0])
            raise IntegrationError(
                f"integrand returned {fx[j]} at x={x[j]!r} (integral #{idx[j]})", abscissa=float(x[j]))
        out[inside] = fx * jac
        return out, off, aux_out

    live = ~empty[owner]
    ipiece = np.flatnonzero(live)
    ilo = np.zeros(ipiece.size)
    ihi = np.ones(ipiece.size)
    if ipiece.size:
        ival, ierr, iblur, iaux = _gk15(h, ilo, ihi, ipiece)
    else:
        ival, ierr, iblur, iaux = np.zeros(0), np.zeros(0), np.zeros(0, bool), None
    converged = np.ones(n, bool)

    for _ in range(4 * spec.max_subdivisions):
        iown = owner[ipiece]
        tot = np.bincount(iown, ival, minlength=n)
        etot = np.bincount(iown, ierr, minlength=n)
        count = np.bincount(iown, minlength=n)
        tol = np.maximum(spec.abs_tol, spec.rel_tol * np.abs(tot))
        # halving an interval whose nodes are already blurred cannot help
        width_ok = ((ihi - ilo) > 1024 * _EPS * np.maximum(np.abs(ilo), np.abs(ihi))) & ~iblur
        can_split = np.bincount(iown, width_ok, minlength=n) > 0
        active = (etot > tol) & (count < spec.max_subdivisions) & can_split
        if not np.any(active):
            converged = etot <= tol
            break
        share = tol / np.maximum(count, 1)
        split = active[iown] & (ierr > share[iown]) & width_ok
        if not np.any(split):
            # nothing individually above its share: split the worst interval per active integral
            order = np.lexsort((-ierr, iown))
            first = np.ones(order.size, bool)
            first[1:] = iown[order][1:] != iown[order][:-1]
            worst = order[first]
            split = np.zeros(ipiece.size, bool)
            split[worst[active[iown[worst]] & width_ok[worst]]] = True
            if not np.any(split):
                converged = etot <= tol
                break
        keep = ~split
        mid = 0.5 * (ilo[split] + ihi[split])
        nlo = np.concatenate([ilo[split], mid])
        nhi = np.concatenate([mid, ihi[split]])
        npc = np.concatenate([ipiece[split], ipiece[split]])
        nval, nerr, nblur, naux = _gk15(h, nlo, nhi, npc)
        ipiece = np.concatenate([ipiece[keep], npc])
        ilo = np.concatenate([ilo[keep], nlo])
        ihi = np.concatenate([ihi[keep], nhi])
        ival = np.concatenate([ival[keep], nval])
        ierr = np.concatenate([ierr[keep], nerr])
        iblur = np.concatenate([iblur[keep], nblur])
        if iaux is not None:
            iaux = np.concatenate([iaux[keep], naux])
    else:
        converged = np.bincount(owner[ipiece], ierr, minlength=n) <= np.maximum(
            spec.abs_tol, spec.rel_tol * np.abs(np.bincount(owner[ipiece], ival, minlength=n)))

    iown = owner[ipiece]
    values = np.bincount(iown, ival, minlength=n) * sign
    errors = np.bincount(iown, ierr, minlength=n)
    converged = converged | empty
    aux = None if iaux is None else np.bincount(iown, iaux, minlength=n)
    return BatchResult(values, errors, n_eval, converged, aux)


def integrate_1d(f: Callable, a: float, b: float, spec: QuadratureSpec | None = None) -> QuadratureResult:
    """Integrate a vectorised real function over ``[a, b]`` (``b`` may be ``inf``)."""
    if not b > a:
        raise ParameterError(f"integrate_1d requires a < b, got a={a}, b={b}")
    res = integrate_batch(lambda x, _i: f(x), [a], [b], spec)
    return res[0]


Bound = float | Callable[..., np.ndarray]


def _bound(value, outer, n):
    if callable(value):
        return np.broadcast_to(np.asarray(value(*outer), dtype=float), (n,))
    return np.full(n, float(value))


def _nested(f, bounds, specs, outer, n):
    level = len(outer)
    lo = _bound(bounds[level][0], outer, n)
    hi = _bound(bounds[level][1], outer, n)
    last = level == len(bounds) - 1
    inner_ok = [True]
    inner_evals = [0]

    def g(x, idx):
        coords = [o[idx] for o in outer] + [x]
        if last:
            return f(*coords)
        sub = _nested(f, bounds, specs, coords, x.size)
        inner_ok[0] &= bool(np.all(sub.converged))
        inner_evals[0] += sub.evaluations
        # inner error estimates ride along and are integrated with the outer rule
        return sub.values, np.abs(sub.errors)

    res = integrate_batch(g, lo, hi, specs[level])
    if not last:
        res = BatchResult(res.values, res.errors + np.abs(res.aux), res.evaluations + inner_evals[0],
                          res.converged & inner_ok[0])
    return res


def integrate_nested(f: Callable, region: Sequence[tuple[Bound, Bound]],
                     specs: Sequence[QuadratureSpec] | QuadratureSpec | None = None) -> QuadratureResult:
    """Iterated integral over a region given as per-axis bounds, outermost axis first.

    ``region[k] = (lo, hi)`` where each bound is a number or a callable of the
    outer coordinates ``(x0, ..., x_{k-1})`` (vectorised).  ``f(x0, ..., x_{d-1})``
    must broadcast over numpy arrays.  The innermost axis is integrated first;
    the inner error estimates are added to the outer one.
    """
    d = len(region)
    if d < 1:
        raise ParameterError("region must have at least one axis")
    if specs is None or isinstance(specs, QuadratureSpec):
        specs = [specs or QuadratureSpec()] * d
    if len(specs) != d:
        raise ParameterError("one QuadratureSpec per axis required")
    res = _nested(f, list(region), list(specs), [], 1)
    return res[0]


def gauss_legendre(n: int, a: float = 0.0, b: float = 1.0):
    """Nodes and weights of the n-point Gauss-Legendre rule on [a, b]."""
    x, w = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


class GradedRule(NamedTuple):
    nodes: np.ndarray
    complement: np.ndarray  # 1 - nodes, computed without cancellation
    weights: np.ndarray


def graded_rule(levels: int = 24, points: int = 8, left: float | None = 0.0,
                right: float | None = 0.0, ratio: float = 0.5) -> GradedRule:
    """Fixed composite rule on [0, 1] graded geometrically towards the ends.

    ``left`` / ``right`` give the exponent ``a`` of the expected endpoint
    behaviour ``z^a`` (or ``(1-z)^a``), ``None`` for no grading at that end.
    Pieces shrink by ``ratio`` towards a graded end down to width
    ``ratio**levels``; the piece touching the end uses Gauss-Jacobi nodes
    for the weight ``z^a``, the others Gauss-Legendre.  Meant for kernels
    evaluated as matrix products, where every row must share the abscissae.
    Use ``complement`` for distances to the right end.
    """
    if levels < 1 or points < 1:
        raise ParameterError("graded_rule needs levels >= 1 and points >= 1")
    for a in (left, right):
        if a is not None and not a > -1:
            raise ParameterError("graded_rule exponents must exceed -1")
    if left is not None and right is not None:
        a = graded_rule(levels, points, left, None, ratio)
        b = graded_rule(levels, points, right, None, ratio)
        return GradedRule(np.concatenate([0.5 * a.nodes, 0.5 + 0.5 * b.complement[::-1]]),
                          np.concatenate([0.5 + 0.5 * a.complement, 0.5 * b.nodes[::-1]]),
                          np.concatenate([0.5 * a.weights, 0.5 * b.weights[::-1]]))
    if left is None and right is None:
        x, w = gauss_legendre(points, 0.0, 1.0)
        return GradedRule(x, 1.0 - x, w)
    if left is None:
        r = graded_rule(levels, points, right, None, ratio)
        return GradedRule(r.complement[::-1], r.nodes[::-1], r.weights[::-1])
    edges = ratio ** np.arange(levels, -1, -1)
    gx, gw = np.polynomial.legendre.leggauss(points)
    lo, hi = edges[:-1, None], edges[1:, None]
    half = 0.5 * (hi - lo)
    x = (0.5 * (lo + hi) + half * gx).ravel()
    xc = ((1.0 - hi) + half * (1.0 - gx)).ravel()
    w = (half * gw).ravel()
    # end piece [0, e]: weight z^a -> Jacobi (1+t)^a on [-1, 1]
    e = edges[0]
    jx, jw = roots_jacobi(points, 0.0, left)
    x0 = 0.5 * e * (jx + 1.0)
    w0 = jw * (0.5 * e) ** (1.0 + left) * x0 ** (-left)
    return GradedRule(np.concatenate([x0, x]), np.concatenate([1.0 - x0, xc]), np.concatenate([w0, w]))


def _half_rule(eps, a, points, ratio, max_pieces):
    # rows graded towards 0 on [0, 1/2]; piece count per row from its own eps, padded
    # with zero-width pieces so every row has the same number of nodes
    eps = np.clip(np.asarray(eps, dtype=float), 1e-300, 0.5)
    n = np.clip(np.ceil(np.log(2.0 * eps) / np.log(ratio)), 1, max_pieces)
    m = int(n.max())
    k = np.arange(m + 1)[None, :]
    frac = np.maximum(n[:, None] - k, 0.0) / n[:, None]
    edges = 0.5 * (2.0 * eps[:, None]) ** frac
    edges[:, 0] = eps
    gx, gw = np.polynomial.legendre.leggauss(points)
    lo, hi = edges[:, :-1, None], edges[:, 1:, None]
    half = 0.5 * (hi - lo)
    x = (0.5 * (lo + hi) + half * gx).reshape(eps.size, -1)
    w = (half * gw).reshape(eps.size, -1)
    jx, jw = roots_jacobi(points, 0.0, a)
    x0 = 0.5 * eps[:, None] * (jx + 1.0)
    w0 = jw * (0.5 * eps[:, None]) ** (1.0 + a) * x0 ** (-a)
    return np.concatenate([x0, x], axis=1), np.concatenate([w0, w], axis=1)


def geometric_rule(eps_left, eps_right, left: float = 0.0, right: float = 0.0, points: int = 8,
                   ratio: float = 0.4, max_pieces: int = 60) -> GradedRule:
    """Per-row composite rules on [0, 1], graded geometrically down to ``eps_left`` at 0
    and ``eps_right`` at 1.

    Row ``i`` resolves features of width ``eps_left[i]`` next to 0 (and
    ``eps_right[i]`` next to 1); the end pieces carry Gauss-Jacobi nodes for
    ``z^left`` / ``(1-z)^right``.  Arrays have shape ``(rows, nodes)``; the
    node count is set by the smallest eps in the call.
    """
    el, er = np.broadcast_arrays(np.atleast_1d(np.asarray(eps_left, float)),
                                 np.atleast_1d(np.asarray(eps_right, float)))
    for a in (left, right):
        if not a > -1:
            raise ParameterError("geometric_rule exponents must exceed -1")
    xl, wl = _half_rule(el, left, points, ratio, max_pieces)
    xr, wr = _half_rule(er, right, points, ratio, max_pieces)
    return GradedRule(np.concatenate([xl, 1.0 - xr], axis=1), np.concatenate([1.0 - xl, xr], axis=1),
                      np.concatenate([wl, wr], axis=1))
