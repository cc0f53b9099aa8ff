"""Empirical distribution tools: ECDF, Kolmogorov-Smirnov distance, 2D histograms."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DomainError


def ks_critical_value(n: int, alpha: float = 0.01) -> float:
    """Asymptotic one-sample KS critical value sqrt(-log(alpha/2)/2)/sqrt(n)."""
    return float(np.sqrt(-0.5 * np.log(alpha / 2.0)) / np.sqrt(n))


class EmpiricalCdf:
    """Right-continuous step function F_n(x) = #{x_i <= x}/n."""

    def __init__(self, samples):
        s = np.sort(np.asarray(samples, dtype=float).ravel())
        if s.size == 0:
            raise DomainError("empirical_cdf needs at least one sample")
        if np.any(np.isnan(s)):
            raise DomainError("samples contain NaN")
        self.sorted = s
        self.n = s.size

    def __call__(self, x):
        return np.searchsorted(self.sorted, x, side="right") / self.n

    def left_limit(self, x):
        return np.searchsorted(self.sorted, x, side="left") / self.n


def empirical_cdf(samples) -> EmpiricalCdf:
    return EmpiricalCdf(samples)


def ks_distance(samples, cdf: Callable, cdf_nodes: int | None = None) -> float:
    """sup |F_n - F| over the sample points and their left limits.

    ``cdf`` must be vectorised.  If ``cdf_nodes`` is given and smaller than the
    sample size, F is evaluated only at that many order statistics and the
    gaps are bracketed using monotonicity of F; the returned value is then a
    guaranteed upper bound on the exact statistic (looser by roughly
    ``1/cdf_nodes``).
    """
    ecdf = samples if isinstance(samples, EmpiricalCdf) else EmpiricalCdf(samples)
    x = ecdf.sorted
    n = ecdf.n
    if cdf_nodes is None or cdf_nodes >= n:
        u = np.unique(x)
        f = np.asarray(cdf(u), dtype=float)
        return float(max(np.max(ecdf(u) - f), np.max(f - ecdf.left_limit(u)), 0.0))
    idx = np.unique(np.linspace(0, n - 1, max(int(cdf_nodes), 2)).round().astype(int))
    nodes = x[idx]
    f = np.asarray(cdf(nodes), dtype=float)
    d = max(np.max(ecdf(nodes) - f), np.max(f - ecdf.left_limit(nodes)))
    # points strictly between consecutive nodes a < b: F(x) in [F(a), F(b)],
    # F_n(x) <= F_n(b-) and F_n(x-) >= F_n(a)
    upper = ecdf.left_limit(nodes[1:]) - f[:-1]
    lower = f[1:] - ecdf(nodes[:-1])
    return float(max(d, np.max(upper), np.max(lower), 0.0))


@dataclass
class Histogram2D:
    """Cell frequencies (fractions of all samples) plus the diagonal-coincidence fraction."""
    x_edges: np.ndarray
    y_edges: np.ndarray
    frequencies: np.ndarray  # shape (len(x_edges)-1, len(y_edges)-1), off-diagonal pairs only
    coincidence: float  # fraction of pairs with x == y (to the supplied resolution)
    n: int

    def standard_errors(self, p=None):
        """Binomial standard error per cell; pass model probabilities to use them instead of the frequencies."""
        p = self.frequencies if p is None else np.asarray(p)
        return np.sqrt(np.clip(p * (1 - p), 0, None) / self.n)


def histogram2d(samples_x, samples_y, x_edges, y_edges, coincidence_tol: float = 0.0,
                coincident=None) -> Histogram2D:
    """Bin pairs on a grid, setting aside pairs with x == y.

    A pair counts as coincident when ``|x - y| <= coincidence_tol`` or, if
    given, where the boolean array ``coincident`` is set (simulators that know
    the two readouts came from the same step pass that directly).
    """
    sx = np.asarray(samples_x, dtype=float).ravel()
    sy = np.asarray(samples_y, dtype=float).ravel()
    if sx.size != sy.size:
        raise DomainError("histogram2d needs equal-length sample arrays")
    n = sx.size
    if n == 0:
        raise DomainError("histogram2d needs at least one sample")
    same = np.abs(sx - sy) <= coincidence_tol
    if coincident is not None:
        same = same | np.asarray(coincident, bool).ravel()
    counts, _, _ = np.histogram2d(sx[~same], sy[~same], bins=[np.asarray(x_edges), np.asarray(y_edges)])
    return Histogram2D(np.asarray(x_edges, float), np.asarray(y_edges, float), counts / n,
                       float(same.mean()), n)
