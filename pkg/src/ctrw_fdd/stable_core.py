"""One-sided beta-stable law: density, distribution function, sampler.

``g(t, u)`` is the density in ``t`` of the subordinator at operational time
``u``, whose Laplace transform is ``exp(-u s^beta)``.  Everything reduces to
the unit-time density ``g1`` by ``g(t, u) = u^(-1/beta) g1(t u^(-1/beta))``.

Methods for ``g1(x)``:

* ZolotarevIntegral: ``g1(x) = beta/((1-beta) pi x) * int_0^pi q e^{-q} dphi`` with
  ``q = x^(-beta/(1-beta)) A(phi)``.  ``A`` increases from ``A0 = A(0)``, so the
  factor ``exp(-x^(-beta/(1-beta)) A0)`` is pulled out and the log-density
  stays finite long after ``g1`` itself underflows.
* SeriesLargeArg: the everywhere-convergent power series in ``x^(-beta)``,
  summed in double precision.  Used where ``x^(-beta) <= 1/2``.
* SeriesSmallArg: the same series summed with mpmath at whatever precision
  the cancellation needs.  Slow; it is the reference the integral is checked
  against for small arguments.
* Auto: SeriesLargeArg where it is accurate, ZolotarevIntegral elsewhere.

:class:`DensityTable` is a spline of the log-density used by the kernel code
where millions of evaluations are needed.
"""

from __future__ import annotations

import enum
import functools
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import gammaln

from .errors import DomainError, IntegrationError, ParameterError
from .quadrature import QuadratureSpec, integrate_batch

_LOG_TINY = np.log(np.finfo(float).tiny)
# q - q0 beyond which the scaled integrands are below e^-46 of their peak
_TAIL_GAP = 46.0
# switch to the double-precision series when x^-beta is at most this
_SERIES_SWITCH = 0.5


class PdfMethod(enum.Enum):
    SERIES_SMALL_ARG = "SeriesSmallArg"
    SERIES_LARGE_ARG = "SeriesLargeArg"
    ZOLOTAREV_INTEGRAL = "ZolotarevIntegral"
    AUTO = "Auto"


@dataclass(frozen=True)
class StableParams:
    beta: float
    pdf_method: PdfMethod = PdfMethod.AUTO
    series_terms: int = 500
    integral_tol: float = 1e-11

    def __post_init__(self):
        if not (0.0 < self.beta < 1.0):
            raise ParameterError(f"beta must lie in the open interval (0, 1), got {self.beta}")
        if isinstance(self.pdf_method, str):
            object.__setattr__(self, "pdf_method", PdfMethod(self.pdf_method))
        if int(self.series_terms) < 1:
            raise ParameterError("series_terms must be >= 1")
        if not self.integral_tol > 0:
            raise ParameterError("integral_tol must be positive")


@dataclass
class PdfDiagnostics:
    """Per-point record of how a density was obtained."""
    method: np.ndarray  # PdfMethod value strings
    underflow: np.ndarray  # True where the density was returned as 0 because it underflows
    error_estimate: np.ndarray  # relative error estimate (nan where not available)


def _check_finite(*arrays):
    for a in arrays:
        if np.any(~np.isfinite(a)):
            raise DomainError("non-finite argument")


def _as_output(x, scalar):
    return float(x) if scalar else x


# -------------------------------------------------------------- Zolotarev kernel

# log(sin z / z) = -z^2/6 - z^4/180 - z^6/2835 - z^8/37800 - z^10/467775 - ...
_LOG_SINC_TAYLOR = np.array([-1 / 467775, -1 / 37800, -1 / 2835, -1 / 180, -1 / 6, 0.0])


def _log_sinc(z):
    """log(sin z / z), accurate relative to z^2 near 0."""
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < 0.1
    with np.errstate(divide="ignore"):
        out = np.log(np.sinc(z / np.pi))
    if np.any(small):
        zs = z[small] ** 2
        out = np.where(small, 0.0, out)
        out[small] = np.polyval(_LOG_SINC_TAYLOR, zs)
    return out


def zolotarev_log_a0(beta):
    return beta / (1.0 - beta) * np.log(beta) + np.log(1.0 - beta)


def zolotarev_log_a_excess(phi, beta):
    """log A(phi) - log A(0); increasing on [0, pi), about beta phi^2 / 2 near 0."""
    b, c = beta, 1.0 - beta
    lb = _log_sinc(b * phi)
    return (lb - _log_sinc(phi)) / c + _log_sinc(c * phi) - lb


def zolotarev_log_a(phi, beta):
    """log A(phi) for phi in [0, pi)."""
    return zolotarev_log_a0(beta) + zolotarev_log_a_excess(phi, beta)


def _solve_excess(target, beta, lo, hi, iters=64):
    """Vectorised bisection for log A(phi) - log A0 = target on [lo, hi]."""
    lo = np.array(np.broadcast_to(lo, target.shape), dtype=float)
    hi = np.array(np.broadcast_to(hi, target.shape), dtype=float)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        below = zolotarev_log_a_excess(mid, beta) < target
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)


def _breakpoints(log_q0, beta):
    """phi at the integrand peak (q = 1) and where it has decayed by e^-46."""
    q0 = np.exp(log_q0)
    top = np.pi * (1 - 1e-15)
    peak = np.where(q0 >= 1.0, 0.0, _solve_excess(np.maximum(-log_q0, 0.0), beta, 0.0, top))
    qp = np.maximum(q0, 1.0)
    # q - q0 at the cut, written relative to q0 to avoid cancellation
    gap = (qp - q0) + _TAIL_GAP + np.log(qp + _TAIL_GAP)
    cut = _solve_excess(np.log1p(gap / q0), beta, peak, top)
    return q0, peak, cut


def _zolotarev_pieces(x, beta, integrand, tol, include_tail=False):
    """Integrate ``integrand(q, d)`` over phi for every x, split at the peak.

    ``q = x^(-beta/(1-beta)) A(phi)`` and ``d = q - q(0) >= 0`` is supplied
    separately because it is needed to full relative accuracy when q(0) is
    large.  Returns (integral, relative error estimate, q(0)).  With
    ``include_tail`` the second piece runs to pi instead of stopping where the
    integrand is negligible.
    """
    log_q0 = -beta / (1.0 - beta) * np.log(x) + zolotarev_log_a0(beta)
    q0, peak, cut = _breakpoints(log_q0, beta)
    if include_tail:
        cut = np.full_like(cut, np.pi)
    n = x.size
    lo = np.concatenate([np.zeros(n), peak])
    hi = np.concatenate([peak, cut])
    owner = np.concatenate([np.arange(n), np.arange(n)])

    def f(phi, i):
        j = owner[i]
        d = q0[j] * np.expm1(zolotarev_log_a_excess(phi, beta))
        return integrand(q0[j] + d, d)

    res = integrate_batch(f, lo, hi, QuadratureSpec(rel_tol=tol, max_subdivisions=100))
    val = res.values[:n] + res.values[n:]
    err = res.errors[:n] + res.errors[n:]
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(val > 0, err / val, np.inf)
    if not np.all(res.converged):
        bad = int(np.flatnonzero(~(res.converged[:n] & res.converged[n:]))[0])
        raise IntegrationError(f"Zolotarev integral did not converge at x={x[bad]!r}",
                               abscissa=float(x[bad]), value=float(val[bad]),
                               error_estimate=float(err[bad]))
    return val, rel, q0


def _logpdf1_zolotarev(x, beta, tol):
    # g1 = beta/((1-beta) pi x) e^{-q0} int q e^{-(q-q0)} dphi
    val, rel, q0 = _zolotarev_pieces(x, beta, lambda q, d: q * np.exp(-d), tol)
    return np.log(beta / ((1 - beta) * np.pi)) - np.log(x) - q0 + np.log(val), rel


# ------------------------------------------------------------------ series

def _series_coefficients(beta, kmax, cdf=False):
    k = np.arange(1, kmax + 1)
    sign = np.where(k % 2 == 1, 1.0, -1.0)
    # pdf: Gamma(k beta + 1)/k!;  tail: Gamma(k beta)/k!
    lg = gammaln(k * beta + (0.0 if cdf else 1.0)) - gammaln(k + 1.0)
    return k, sign * np.sin(k * np.pi * beta) / np.pi, lg


def _pdf1_series(x, beta, kmax, cdf=False):
    """Double-precision series; ``cdf=True`` gives the survival function."""
    k, c, lg = _series_coefficients(beta, kmax, cdf)
    z = np.log(x)[:, None] * (-beta * k)[None, :]
    terms = c[None, :] * np.exp(lg[None, :] + z)
    total = terms.sum(axis=1)
    return total if cdf else total / x


def _series_terms_needed(x_min, beta, cap):
    # terms decay like Gamma(k beta + 1)/k! * r^k with r = x^-beta
    r = x_min ** -beta
    k = np.arange(1, cap + 1)
    lg = gammaln(k * beta + 1) - gammaln(k + 1.0) + k * np.log(r)
    small = np.flatnonzero((lg < lg.max() - 45) & (k > 3) & (np.diff(np.append(lg, -np.inf)) < 0))
    if small.size == 0:
        raise IntegrationError(f"series needs more than series_terms={cap} terms at x={x_min!r}")
    return int(k[small[0]])


def _pdf1_series_mp(x, beta, cap, cdf=False):
    """Reference summation with mpmath; precision raised until two passes agree."""
    import mpmath as mp

    out = np.empty(x.size)
    for i, xi in enumerate(x):
        r = float(xi) ** -beta
        k = np.arange(1, cap + 1)
        lg = gammaln(k * beta + 1) - gammaln(k + 1.0) + k * np.log(r)
        dps = int(25 + max(lg.max(), 0) / np.log(10))
        prev = None
        while True:
            with mp.workdps(dps):
                xb, b = mp.mpf(float(xi)), mp.mpf(beta)
                s = mp.mpf(0)
                tiny = mp.mpf(10) ** (-dps)
                converged = False
                for kk in range(1, cap + 1):
                    if cdf:
                        t = mp.gamma(kk * b) / mp.factorial(kk) * xb ** (-kk * b)
                    else:
                        t = mp.gamma(kk * b + 1) / mp.factorial(kk) * xb ** (-kk * b - 1)
                    t *= mp.sinpi(kk * b) / mp.pi
                    s += t if kk % 2 == 1 else -t
                    # compare the sin-free magnitude: sin(k pi beta) can vanish
                    mag = abs(t / mp.sinpi(kk * b)) if mp.sinpi(kk * b) != 0 else abs(
                        mp.gamma(kk * b + 1) / mp.factorial(kk) * xb ** (-kk * b - 1))
                    if kk > 3 and mag < tiny * abs(s):
                        converged = True
                        break
                if not converged:
                    raise IntegrationError(f"series needs more than series_terms={cap} terms at x={xi!r}")
                val = float(s)
            if prev is not None and abs(val - prev) <= 1e-15 * abs(val):
                break
            prev = val
            dps += 20
        out[i] = val
    return out


# ------------------------------------------------------------------ unit-time g1

def _logpdf1(x, params, want_diag=False):
    """log g1 on x > 0 (flat array) with method bookkeeping."""
    beta = params.beta
    m = params.pdf_method
    out = np.empty(x.size)
    rel = np.full(x.size, np.nan)
    used = np.empty(x.size, dtype=object)
    if m is PdfMethod.AUTO:
        use_series = x ** -beta <= _SERIES_SWITCH
    elif m is PdfMethod.SERIES_LARGE_ARG:
        use_series = np.ones(x.size, bool)
    else:
        use_series = np.zeros(x.size, bool)

    if np.any(use_series):
        xs = x[use_series]
        kmax = _series_terms_needed(xs.min(), beta, params.series_terms)
        with np.errstate(divide="ignore"):
            out[use_series] = np.log(np.maximum(_pdf1_series(xs, beta, kmax), 0.0))
        used[use_series] = PdfMethod.SERIES_LARGE_ARG.value
    rest = ~use_series
    if np.any(rest):
        xr = x[rest]
        if m is PdfMethod.SERIES_SMALL_ARG:
            with np.errstate(divide="ignore"):
                out[rest] = np.log(np.maximum(_pdf1_series_mp(xr, beta, params.series_terms), 0.0))
            used[rest] = m.value
        else:
            out[rest], rel[rest] = _logpdf1_zolotarev(xr, beta, params.integral_tol)
            used[rest] = PdfMethod.ZOLOTAREV_INTEGRAL.value
    return out, used, rel


def _broadcast(*args):
    arrs = [np.asarray(a, dtype=float) for a in args]
    scalar = all(a.ndim == 0 for a in arrs)
    arrs = np.broadcast_arrays(*arrs)
    return scalar, arrs


def stable_logpdf(params: StableParams, t, u=1.0, diagnostics: bool = False):
    """log g(t, u); ``-inf`` for t <= 0."""
    scalar, (t, u) = _broadcast(t, u)
    _check_finite(t, u)
    if np.any(u <= 0):
        raise DomainError("operational time u must be positive")
    shape = t.shape
    t, u = t.ravel(), u.ravel()
    scale = u ** (-1.0 / params.beta)
    pos = t > 0
    out = np.full(t.size, -np.inf)
    used = np.full(t.size, "support", dtype=object)
    rel = np.full(t.size, np.nan)
    if np.any(pos):
        lg, used[pos], rel[pos] = _logpdf1(t[pos] * scale[pos], params)
        out[pos] = lg + np.log(scale[pos])
    out = out.reshape(shape)
    if diagnostics:
        diag = PdfDiagnostics(used.reshape(shape), (pos & (out.ravel() < _LOG_TINY)).reshape(shape),
                              rel.reshape(shape))
        return _as_output(out, scalar), diag
    return _as_output(out, scalar)


def stable_pdf(params: StableParams, t, u=1.0, diagnostics: bool = False):
    """Density g(t, u) of the subordinator at operational time ``u``.

    Exactly 0 for t <= 0.  Where the density is below the smallest normal
    double it is returned as 0 and flagged in the diagnostics.
    """
    res = stable_logpdf(params, t, u, diagnostics=True)
    lg, diag = res
    val = np.exp(np.where(diag.underflow, -np.inf, lg))
    val = float(val) if np.ndim(val) == 0 else val
    return (val, diag) if diagnostics else val


def stable_laplace(params: StableParams, u, s):
    """exp(-u s^beta)."""
    scalar, (u, s) = _broadcast(u, s)
    if np.any(u < 0) or np.any(s < 0):
        raise DomainError("stable_laplace needs u >= 0 and s >= 0")
    return _as_output(np.exp(-u * s ** params.beta), scalar)


def _cdf1(x, params):
    """(cdf, survival) of the unit-time law on x > 0."""
    beta = params.beta
    tol = params.integral_tol
    cdf = np.zeros(x.size)
    sf = np.ones(x.size)
    series = x ** -beta <= _SERIES_SWITCH
    if np.any(series):
        xs = x[series]
        kmax = _series_terms_needed(xs.min(), beta, params.series_terms)
        sf[series] = _pdf1_series(xs, beta, kmax, cdf=True)
        cdf[series] = 1.0 - sf[series]
    rest = ~series
    if np.any(rest):
        xr = x[rest]
        # F = e^{-q0}/pi * int e^{-(q - q0)} dphi
        val, _, q0 = _zolotarev_pieces(xr, beta, lambda q, d: np.exp(-d), tol)
        c = np.exp(-q0) * val / np.pi
        # survival directly where F is not small, to keep relative accuracy in the tail
        big = c > 0.05
        s = 1.0 - c
        if np.any(big):
            sv, _, _ = _zolotarev_pieces(xr[big], beta, lambda q, d: -np.expm1(-q), tol, include_tail=True)
            s[big] = sv / np.pi
            c[big] = 1.0 - s[big]
        cdf[rest], sf[rest] = c, s
    return cdf, sf


def stable_cdf(params: StableParams, t, u=1.0):
    """P(D_u <= t)."""
    scalar, (t, u) = _broadcast(t, u)
    _check_finite(t, u)
    if np.any(u <= 0):
        raise DomainError("operational time u must be positive")
    shape = t.shape
    t, u = t.ravel(), u.ravel()
    out = np.zeros(t.size)
    pos = t > 0
    if np.any(pos):
        out[pos] = _cdf1(t[pos] * u[pos] ** (-1.0 / params.beta), params)[0]
    return _as_output(out.reshape(shape), scalar)


def stable_sf(params: StableParams, t, u=1.0):
    """P(D_u > t), accurate in the far tail."""
    scalar, (t, u) = _broadcast(t, u)
    _check_finite(t, u)
    if np.any(u <= 0):
        raise DomainError("operational time u must be positive")
    shape = t.shape
    t, u = t.ravel(), u.ravel()
    out = np.ones(t.size)
    pos = t > 0
    if np.any(pos):
        out[pos] = _cdf1(t[pos] * u[pos] ** (-1.0 / params.beta), params)[1]
    return _as_output(out.reshape(shape), scalar)


def unit_stable_variates(beta: float, uniform, exponential):
    """Kanter's representation: (A(pi U)/E)^((1-beta)/beta) has Laplace transform exp(-s^beta)."""
    log_a = zolotarev_log_a(np.pi * np.asarray(uniform), beta)
    return np.exp((1.0 - beta) / beta * (log_a - np.log(exponential)))


def stable_sample(params: StableParams, u, rng: np.random.Generator, size=None):
    """Draw D_u = u^(1/beta) D_1 using Kanter's representation."""
    if not np.all(np.asarray(u) > 0):
        raise DomainError("operational time u must be positive")
    uni = rng.random(size)
    exp = rng.standard_exponential(size)
    d1 = unit_stable_variates(params.beta, uni, exp)
    out = np.asarray(u, dtype=float) ** (1.0 / params.beta) * d1
    return float(out) if size is None and np.ndim(out) == 0 else out


def inverse_stable_pdf(params: StableParams, t, x):
    """Density in x of the first-passage time E_t: (t/beta) x^(-1-1/beta) g1(t x^(-1/beta))."""
    scalar, (t, x) = _broadcast(t, x)
    _check_finite(t, x)
    if np.any(t <= 0) or np.any(x <= 0):
        raise DomainError("inverse_stable_pdf needs t > 0 and x > 0")
    b = params.beta
    lg = stable_logpdf(params, t * x ** (-1.0 / b), 1.0)
    out = np.exp(np.log(t / b) - (1.0 + 1.0 / b) * np.log(x) + lg)
    return _as_output(out, scalar)


# ------------------------------------------------------------------ fast table

class DensityTable:
    """Cubic spline of log g1 in y = log x, for bulk evaluation.

    The spline is fitted to ``log g1(e^y) + A0 e^{-y beta/(1-beta)}``, which
    removes the essential singularity at x -> 0 and leaves a smooth function.
    Outside the tabulated range the series (large x) or the integral (tiny x)
    is used directly.  Relative error is about 1e-11.
    """

    def __init__(self, beta: float, spacing: float = 0.004):
        self.params = StableParams(beta)
        self.beta = beta
        self.kappa = beta / (1.0 - beta)
        self.a0 = np.exp(zolotarev_log_a0(beta))
        # below y_lo the density is under exp(-760); above y_hi the series is exact
        self.y_lo = -np.log(760.0 / self.a0) / self.kappa
        self.y_hi = np.log(1.0 / _SERIES_SWITCH) / beta + 1.0
        y = np.arange(self.y_lo, self.y_hi + spacing, spacing)
        lg, _, _ = _logpdf1(np.exp(y), self.params)
        ramp = self.a0 * np.exp(-self.kappa * y)
        self._spline = CubicSpline(y, lg + ramp)
        self._series_terms = _series_terms_needed(np.exp(self.y_hi - 1.0), beta, 500)
        # distribution function: log F1 + A0 x^-kappa is smooth as well; log S1 for the upper tail
        cdf, sf = _cdf1(np.exp(y), self.params)
        # F1 underflows near y_lo; below the first value above 1e-290 it is taken as 0
        k = int(np.argmax(cdf > 1e-290))
        self._y_cdf_lo = y[k]
        self._cdf_spline = CubicSpline(y[k:], np.log(cdf[k:]) + ramp[k:])
        self._sf_spline = CubicSpline(y, np.log(sf))
        self._y_mid = y[np.searchsorted(cdf, 0.5)]

    def logpdf1(self, x):
        x = np.asarray(x, dtype=float)
        shape = x.shape
        x = x.ravel()
        out = np.full(x.size, -np.inf)
        pos = x > 0
        y = np.log(np.where(pos, x, 1.0))
        mid = pos & (y >= self.y_lo) & (y <= self.y_hi)
        out[mid] = self._spline(y[mid]) - self.a0 * np.exp(-self.kappa * y[mid])
        high = pos & (y > self.y_hi)
        if np.any(high):
            out[high] = np.log(_pdf1_series(x[high], self.beta, self._series_terms))
        low = pos & (y < self.y_lo)
        if np.any(low):
            out[low] = _logpdf1_zolotarev(x[low], self.beta, 1e-10)[0]
        return out.reshape(shape)

    def cdf1(self, x):
        """(F1(x), 1 - F1(x)) of the unit-time law, vectorised."""
        x = np.asarray(x, dtype=float)
        shape = x.shape
        x = x.ravel()
        cdf = np.zeros(x.size)
        sf = np.ones(x.size)
        pos = x > 0
        y = np.log(np.where(pos, x, 1.0))
        mid = pos & (y >= self._y_cdf_lo) & (y <= self.y_hi)
        ym = y[mid]
        lower = ym < self._y_mid
        c = np.empty(ym.size)
        s = np.empty(ym.size)
        c[lower] = np.exp(self._cdf_spline(ym[lower]) - self.a0 * np.exp(-self.kappa * ym[lower]))
        s[lower] = 1.0 - c[lower]
        s[~lower] = np.exp(self._sf_spline(ym[~lower]))
        c[~lower] = 1.0 - s[~lower]
        cdf[mid], sf[mid] = c, s
        high = pos & (y > self.y_hi)
        if np.any(high):
            sf[high] = _pdf1_series(x[high], self.beta, self._series_terms, cdf=True)
            cdf[high] = 1.0 - sf[high]
        low = pos & (y < self._y_cdf_lo)
        cdf[low], sf[low] = 0.0, 1.0
        return cdf.reshape(shape), sf.reshape(shape)

    def inverse_cdf(self, t, x):
        """P(E_t <= x) = P(D_x >= t), vectorised; 0 for x <= 0."""
        t, x = np.broadcast_arrays(np.asarray(t, float), np.asarray(x, float))
        out = np.zeros(t.shape)
        ok = x > 0
        out[ok] = self.cdf1(t[ok] * x[ok] ** (-1.0 / self.beta))[1]
        return out

    def logpdf(self, t, u=1.0):
        t, u = np.broadcast_arrays(np.asarray(t, float), np.asarray(u, float))
        s = u ** (-1.0 / self.beta)
        with np.errstate(divide="ignore"):
            return self.logpdf1(t * s) + np.log(s)

    def pdf(self, t, u=1.0):
        t, u = np.broadcast_arrays(np.asarray(t, float), np.asarray(u, float))
        s = u ** (-1.0 / self.beta)
        x = t * s
        out = np.zeros(x.shape)
        # below y_lo log g1 < -760, so exp underflows unless the scale factor is huge
        with np.errstate(divide="ignore"):
            need = (x > 0) & ((np.log(np.where(x > 0, x, 1.0)) >= self.y_lo) | (s > 1e4))
            out[need] = np.exp(self.logpdf1(x[need]) + np.log(s[need]))
        return out

    def inverse_pdf(self, t, x):
        """Density of E_t at x, vectorised."""
        t, x = np.broadcast_arrays(np.asarray(t, float), np.asarray(x, float))
        b = self.beta
        out = np.zeros(t.shape)
        ok = (t > 0) & (x > 0)
        with np.errstate(divide="ignore", over="ignore"):
            arg = t * x ** (-1 / b)
            ok &= (np.log(np.where(arg > 0, arg, 1.0)) >= self.y_lo) | (np.log(t / b) - (1 + 1 / b) * np.log(x) > 10)
        tt, xx = t[ok], x[ok]
        out[ok] = np.exp(np.log(tt / b) - (1 + 1 / b) * np.log(xx) + self.logpdf1(tt * xx ** (-1 / b)))
        return out


@functools.lru_cache(maxsize=16)
def density_table(beta: float) -> DensityTable:
    return DensityTable(float(beta))
