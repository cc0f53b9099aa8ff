"""Monte Carlo oracle: subordinator paths, renewal readouts, and pre-limit CTRWs.

Paths of D_u are built from exact stable increments on a grid of step du
(Kanter's representation, drawn inside numba loops from per-block Philox
generators).  Path blocks have fixed size and their own streams, so results
do not depend on how blocks are spread over workers.

Readouts follow the grid convention: E_t is located in the straddling
interval (u_{k-1}, u_k] where D_{u_{k-1}} <= t < D_{u_k}; G_{t-} and H_t are
the grid values of D at the two ends.  Every renewal simulation also reports
the same quantities on the grid of step 2 du (the even sub-grid of the same
path), so grid bias can be measured or extrapolated away.
"""

from __future__ import annotations

import enum
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.special import gamma

from .ecdf import EmpiricalCdf, Histogram2D, empirical_cdf, histogram2d, ks_critical_value, ks_distance
from .errors import DomainError, HorizonError, ParameterError
from .renewal_kernels import ModelKind, ModelSpec
from .rng import rng_stream
from .stable_core import unit_stable_variates

__all__ = [
    "CtrwConfig", "CtrwSample", "EmpiricalCdf", "Histogram2D", "PathSample", "RenewalReadout",
    "RenewalSample", "WaitingLaw", "empirical_cdf", "histogram2d", "ks_critical_value", "ks_distance",
    "read_renewal", "sample_path", "simulate_ctrw", "simulate_renewal", "worker_count",
]

BLOCK = 1 << 14


def worker_count(workers: int | None = None) -> int:
    """CTRW_FDD_WORKERS overrides the argument; default 1."""
    env = os.environ.get("CTRW_FDD_WORKERS")
    if env:
        workers = int(env)
    workers = 1 if workers is None else int(workers)
    if workers < 1:
        raise ParameterError("workers must be >= 1")
    return workers


# -- single paths ---------------------------------------------------------------

@dataclass
class PathSample:
    u_grid: np.ndarray
    d_values: np.ndarray
    a_values: np.ndarray
    model: ModelSpec
    seed: int

    def __post_init__(self):
        n = len(self.u_grid)
        if len(self.d_values) != n or len(self.a_values) != n:
            raise ParameterError("path arrays must have equal length")


def sample_path(model: ModelSpec, u_max: float, n_steps: int, seed: int,
                chi: float = 0.0, tau: float = 0.0) -> PathSample:
    """(A_u, D_u) on the grid u_k = k u_max / n_steps, from exact stable increments."""
    if not u_max > 0 or n_steps < 1:
        raise ParameterError("sample_path needs u_max > 0 and n_steps >= 1")
    u = np.linspace(0.0, u_max, n_steps + 1)
    if model.kind is ModelKind.PURE_DRIFT:
        return PathSample(u, tau + u, chi + u, model, seed)
    rng = rng_stream(seed)
    du = u_max / n_steps
    uni = rng.random(n_steps) + 2.0 ** -54
    ex = rng.standard_exponential(n_steps)
    inc = du ** (1.0 / model.beta) * unit_stable_variates(model.beta, uni, ex)
    dbar = np.concatenate([[0.0], np.cumsum(inc)])
    a = chi + (u if model.kind is ModelKind.EXAMPLE1 else dbar)
    return PathSample(u, tau + dbar, a, model, seed)


@dataclass
class RenewalReadout:
    t: float
    e: float
    g: float
    h: float
    v: float
    r: float
    x: float
    y: float
    e_lower: float = float("nan")  # E_t lies in (e_lower, e]


def read_renewal(path: PathSample, t: float) -> RenewalReadout:
    d = path.d_values
    tau = d[0]
    if t < tau:
        raise DomainError(f"query time {t} precedes the start time {tau}")
    if path.model.kind is ModelKind.PURE_DRIFT:
        e = t - tau
        if e > path.u_grid[-1]:
            raise HorizonError(f"t = {t} beyond the path horizon; increase u_max")
        x = path.a_values[0] + e
        return RenewalReadout(t, e, t, t, 0.0, 0.0, x, x, e)
    k = int(np.searchsorted(d, t, side="right"))
    if k >= d.size:
        raise HorizonError(f"D_u stays below t = {t} up to u = {path.u_grid[-1]}; increase u_max")
    g, h = d[k - 1], d[k]
    return RenewalReadout(t, path.u_grid[k], g, h, t - g, h - t, path.a_values[k - 1], path.a_values[k],
                          path.u_grid[k - 1])


# -- numba cores ------------------------------------------------------------------

@njit(cache=True)
def _unit_stable(gen, beta):
    u = gen.random() + 2.0 ** -54
    e = gen.standard_exponential()
    if e <= 0.0:
        e = 1e-300
    phi = np.pi * u
    sb = np.sin(beta * phi)
    la = np.log(sb / np.sin(phi)) / (1.0 - beta) + np.log(np.sin((1.0 - beta) * phi) / sb)
    return np.exp((1.0 - beta) / beta * (la - np.log(e)))


@njit(cache=True)
def _renewal_block(gen, n, beta, du, times, tau, max_steps, k_fine, g_fine, h_fine, k_coarse, g_coarse, h_coarse):
    """Step D until every query time is straddled on both the du and 2 du grids.

    Writes step indices k (E_t in (u_{k-1}, u_k]) and the bracketing D values.
    Returns the number of paths that hit max_steps (0 on success).
    """
    nt = times.size
    scale = du ** (1.0 / beta)
    failed = 0
    for p in range(n):
        d_prev2 = tau  # D at step k-2
        d_prev = tau  # D at step k-1
        d = tau
        jf = 0
        jc = 0
        k = 0
        while jc < nt:
            k += 1
            if k > max_steps:
                failed += 1
                break
            d_prev2 = d_prev
            d_prev = d
            d = d + scale * _unit_stable(gen, beta)
            while jf < nt and d > times[jf]:
                k_fine[p, jf] = k
                g_fine[p, jf] = d_prev
                h_fine[p, jf] = d
                jf += 1
            if k % 2 == 0:
                while jc < nt and d > times[jc]:
                    k_coarse[p, jc] = k
                    g_coarse[p, jc] = d_prev2
                    h_coarse[p, jc] = d
                    jc += 1
    return failed


@njit(cache=True)
def _ctrw_block(gen, n, beta, waiting, wscale, jump_kind, inv_c, times, chi, tau, factors, max_steps,
                xs, ys):
    """Pre-limit CTRW paths; coarsened chains group `factors[m]` consecutive steps.

    waiting: 0 exact stable, 1 Pareto tail, 2 deterministic.  jump_kind: 1 constant
    1/c, 2 equal to the waiting time.  xs, ys have shape (n, n_factors, n_times).
    """
    nt = times.size
    nf = factors.size
    s_group = np.empty(nf)
    pending = np.empty(nf, np.int64)
    failed = 0
    for p in range(n):
        T = tau
        S = chi
        for m in range(nf):
            s_group[m] = chi
            pending[m] = 0
        k = 0
        done = 0
        while done < nf:
            k += 1
            if k > max_steps:
                failed += 1
                break
            if waiting == 0:
                w = wscale * _unit_stable(gen, beta)
            elif waiting == 1:
                w = wscale * (1.0 - gen.random()) ** (-1.0 / beta)
            else:
                w = wscale
            T += w
            S += inv_c if jump_kind == 1 else w
            for m in range(nf):
                if k % factors[m] == 0:
                    while pending[m] < nt and T > times[pending[m]]:
                        xs[p, m, pending[m]] = s_group[m]
                        ys[p, m, pending[m]] = S
                        pending[m] += 1
                        if pending[m] == nt:
                            done += 1
                    s_group[m] = S
    return failed


# -- bulk renewal readouts ------------------------------------------------------

@dataclass
class RenewalSample:
    """Readouts of n_paths independent paths at each query time (arrays of shape (n_paths, n_times)).

    ``k``: step index of the straddling interval on the du grid; ``g``, ``h``:
    D at its ends.  The ``*_coarse`` arrays are the same on the 2 du grid.
    """
    model: ModelSpec
    times: np.ndarray
    du: float
    chi: float
    tau: float
    seed: int
    k: np.ndarray
    g: np.ndarray
    h: np.ndarray
    k_coarse: np.ndarray
    g_coarse: np.ndarray
    h_coarse: np.ndarray

    @property
    def n_paths(self) -> int:
        return self.k.shape[0]

    def e(self, coarse: bool = False, where: str = "mid"):
        """E_t estimate: ``upper`` grid end, ``lower`` end or the ``mid`` point of the straddling interval."""
        k, step = (self.k_coarse, 2 * self.du) if coarse else (self.k, self.du)
        up = k * self.du
        return {"upper": up, "lower": up - step, "mid": up - 0.5 * step}[where]

    def e_extrapolated(self):
        """Per-path Richardson combination 2 e(du) - e(2 du) of the midpoint estimates."""
        return 2.0 * self.e() - self.e(coarse=True)

    def v(self, coarse: bool = False):
        return self.times - (self.g_coarse if coarse else self.g)

    def r(self, coarse: bool = False):
        return (self.h_coarse if coarse else self.h) - self.times

    def x(self):
        if self.model.kind is ModelKind.EXAMPLE2:
            return self.chi + self.g - self.tau
        return self.chi + self.e(where="lower")

    def y(self):
        if self.model.kind is ModelKind.EXAMPLE2:
            return self.chi + self.h - self.tau
        return self.chi + self.e(where="upper")

    def coincident(self, i: int, j: int, coarse: bool = False):
        """Paths whose readouts at times i and j come from the same step (E equal at grid resolution)."""
        k = self.k_coarse if coarse else self.k
        return k[:, i] == k[:, j]


def _renewal_job(args):
    beta, du, times, tau, max_steps, seed, block, n = args
    gen = rng_stream(seed, block)
    nt = times.size
    out = [np.zeros((n, nt), np.int64), np.zeros((n, nt)), np.zeros((n, nt)),
           np.zeros((n, nt), np.int64), np.zeros((n, nt)), np.zeros((n, nt))]
    failed = _renewal_block(gen, n, beta, du, times, tau, max_steps, *out)
    return failed, out


def _blocks(n_paths):
    nb = -(-n_paths // BLOCK)
    return [(b, min(BLOCK, n_paths - b * BLOCK)) for b in range(nb)]


def _run(job, jobs, workers):
    if workers == 1 or len(jobs) == 1:
        return [job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(job, jobs))


def simulate_renewal(model: ModelSpec, times, n_paths: int, seed: int, du: float = 2e-3,
                     chi: float = 0.0, tau: float = 0.0, u_max: float | None = None,
                     workers: int | None = None) -> RenewalSample:
    """Renewal readouts of many independent (A, D) paths at the given times."""
    times = np.asarray(times, float)
    if times.ndim != 1 or times.size == 0 or np.any(np.diff(times) <= 0):
        raise ParameterError("times must be a non-empty strictly increasing list")
    if np.any(times < tau):
        raise DomainError("query times must not precede the start time")
    if n_paths < 1 or not du > 0:
        raise ParameterError("need n_paths >= 1 and du > 0")
    if model.kind is ModelKind.PURE_DRIFT:
        k = np.broadcast_to(np.ceil((times - tau) / du).astype(np.int64), (n_paths, times.size)).copy()
        t = np.broadcast_to(times, k.shape).copy()
        kc = 2 * np.ceil(k / 2).astype(np.int64)
        return RenewalSample(model, times, du, chi, tau, seed, k, t, t.copy(), kc, t.copy(), t.copy())
    if u_max is None:
        # far beyond any plausible E_{t_max}: P(E_t > u) decays like exp(-c u^(1/(1-beta)))
        u_max = 50.0 * max(times[-1] - tau, du) ** model.beta + 100 * du
    max_steps = int(np.ceil(u_max / du))
    jobs = [(model.beta, du, times, tau, max_steps, seed, b, n) for b, n in _blocks(n_paths)]
    res = _run(_renewal_job, jobs, worker_count(workers))
    failed = sum(r[0] for r in res)
    if failed:
        raise HorizonError(f"{failed} paths did not pass t = {times[-1]} by u = {u_max}; increase u_max")
    parts = [np.concatenate([r[1][i] for r in res]) for i in range(6)]
    return RenewalSample(model, times, du, chi, tau, seed, *parts)


# -- pre-limit CTRW ---------------------------------------------------------------

class WaitingLaw(enum.Enum):
    EXACT_STABLE = "ExactStable"
    PARETO_TAIL = "ParetoTail"


@dataclass(frozen=True)
class CtrwConfig:
    """Scale c, waiting-time law and clock horizon of a pre-limit CTRW.

    ExactStable: W = c^(-1/beta) D_1.  ParetoTail: W = (c Gamma(1-beta))^(-1/beta) P
    with P(P > w) = w^(-beta) on w >= 1; the factor Gamma(1-beta)^(-1/beta)
    matches the tail of D_1, so both laws share the same limit.
    """
    c: float
    waiting_law: WaitingLaw = WaitingLaw.EXACT_STABLE
    horizon: float = 10.0

    def __post_init__(self):
        if isinstance(self.waiting_law, str):
            object.__setattr__(self, "waiting_law", WaitingLaw(self.waiting_law))
        if not self.c > 0:
            raise ParameterError("CtrwConfig needs c > 0")
        if not self.horizon > 0:
            raise ParameterError("CtrwConfig needs horizon > 0")


@dataclass
class CtrwSample:
    """X^c_t and Y^c_t per path and time; ``scales[m]`` is the c of slice ``x[:, m, :]``."""
    times: np.ndarray
    scales: np.ndarray
    x: np.ndarray
    y: np.ndarray
    seed: int
    meta: dict = field(default_factory=dict)

    def at_scale(self, c: float):
        m = int(np.flatnonzero(np.isclose(self.scales, c))[0])
        return self.x[:, m, :], self.y[:, m, :]


def _ctrw_job(args):
    beta, waiting, wscale, jump_kind, inv_c, times, chi, tau, factors, max_steps, seed, block, n = args
    gen = rng_stream(seed, block)
    xs = np.zeros((n, factors.size, times.size))
    ys = np.zeros_like(xs)
    failed = _ctrw_block(gen, n, beta, waiting, wscale, jump_kind, inv_c, times, chi, tau, factors,
                         max_steps, xs, ys)
    return failed, xs, ys


def simulate_ctrw(model: ModelSpec, cfg: CtrwConfig, t_list, seed: int, n_paths: int,
                  chi: float = 0.0, tau: float = 0.0, coarsen=(1,), workers: int | None = None) -> CtrwSample:
    """Sample (X^c_t, Y^c_t) = (S_{N_t}, S_{N_t + 1}) at each t.

    ``coarsen`` lists grouping factors m: grouping m consecutive steps of an
    ExactStable walk at scale c gives an exact walk at scale c/m, so one run
    yields several scales.  Only ExactStable waiting times (and PureDrift) allow it.
    """
    times = np.asarray(t_list, float)
    if times.ndim != 1 or times.size == 0 or np.any(np.diff(times) <= 0):
        raise ParameterError("t_list must be a non-empty strictly increasing list")
    if times[-1] > cfg.horizon:
        raise HorizonError(f"t = {times[-1]} is beyond the horizon {cfg.horizon}")
    if n_paths < 1:
        raise ParameterError("n_paths must be >= 1")
    factors = np.array(sorted(set(int(m) for m in coarsen)), np.int64)
    if factors[0] < 1:
        raise ParameterError("coarsening factors must be positive integers")
    if factors.size > 1 and cfg.waiting_law is not WaitingLaw.EXACT_STABLE:
        raise ParameterError("coarsening is exact only for ExactStable waiting times")
    c = float(cfg.c)
    if model.kind is ModelKind.PURE_DRIFT:
        beta, waiting, wscale, jump = 0.5, 2, 1.0 / c, 1
    else:
        beta = model.beta
        if cfg.waiting_law is WaitingLaw.EXACT_STABLE:
            waiting, wscale = 0, c ** (-1.0 / beta)
        else:
            waiting, wscale = 1, (c * gamma(1.0 - beta)) ** (-1.0 / beta)
        jump = 1 if model.kind is ModelKind.EXAMPLE1 else 2
    # steps needed to pass the horizon: far beyond c * E_horizon
    max_steps = int(c * (60.0 * max(cfg.horizon - tau, 1e-9) ** (beta if waiting != 2 else 1.0) + 10)) + factors[-1]
    jobs = [(beta, waiting, wscale, jump, 1.0 / c, times, chi, tau, factors, max_steps, seed, b, n)
            for b, n in _blocks(n_paths)]
    res = _run(_ctrw_job, jobs, worker_count(workers))
    failed = sum(r[0] for r in res)
    if failed:
        raise HorizonError(f"{failed} walks did not pass t = {times[-1]} within {max_steps} steps")
    xs = np.concatenate([r[1] for r in res])
    ys = np.concatenate([r[2] for r in res])
    meta = {"c": c, "waiting_law": cfg.waiting_law.value, "model": model.kind.value}
    return CtrwSample(times, c / factors, xs, ys, seed, meta)
