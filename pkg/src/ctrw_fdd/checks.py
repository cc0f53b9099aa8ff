"""The acceptance checks, shared by ``ctrw-fdd verify`` and the test suite.

Each check returns a :class:`CheckResult` whose rows are plain numbers (no
timings), so two runs with the same seed serialise to identical bytes.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import betainc, gamma

from .ecdf import histogram2d, ks_critical_value, ks_distance
from .fdd import (StateXV, StateYR, TwoTimeLaw, compose_p_example1, compose_p_example2, compose_q_example1,
                  compose_q_example2, inverse_subordinator_law, joint_inverse_two_times, joint_xyvr,
                  marginal_density, moments, p_kernel, q_kernel, total_mass)
from .mc_sim import CtrwConfig, simulate_ctrw, simulate_renewal
from .quadrature import QuadratureSpec, integrate_1d
from .renewal_kernels import ModelSpec
from .stable_core import StableParams, density_table, inverse_stable_pdf, stable_laplace, stable_pdf

DEFAULT_SEED = 20261016
COLUMNS = ("check", "item", "value", "reference", "error", "tolerance", "pass")

# the 20 x 20 grid for the two-time comparison covers all but 8e-4 of the law
TWO_TIME_X = np.linspace(0.0, 5.0, 21)
TWO_TIME_Y = np.linspace(0.0, 7.0, 21)


@dataclass
class VerifyConfig:
    seed: int = DEFAULT_SEED
    quick: bool = False
    two_time_paths: int = 1_000_000
    ctrw_paths: int = 100_000
    ctrw_scales: tuple = (1e2, 1e3, 1e4)
    ordering_paths: int = 100_000
    du: float = 2e-3
    workers: int | None = None
    mass_times: tuple = (0.5, 1.0, 2.0)

    @classmethod
    def make(cls, quick: bool = False, seed: int = DEFAULT_SEED, workers=None) -> "VerifyConfig":
        if quick:
            return cls(seed, True, 200_000, 20_000, (1e1, 1e2, 1e3), 20_000, 2e-3, workers, (1.0,))
        return cls(seed, False, workers=workers)


@dataclass
class CheckResult:
    key: str
    title: str
    rows: list = field(default_factory=list)
    seconds: float = 0.0
    budget: float = np.inf
    notes: str = ""

    def add(self, item, value, reference, tolerance, error=None):
        if error is None:
            error = abs(float(value) - float(reference))
        self.rows.append((self.key, str(item), float(value), float(reference), float(error), float(tolerance),
                          bool(error <= tolerance)))

    @property
    def passed(self) -> bool:
        return bool(self.rows) and all(r[-1] for r in self.rows) and self.seconds <= self.budget

    @property
    def failures(self):
        return [r for r in self.rows if not r[-1]]


def _timed(fn):
    def run(*args, **kw):
        t0 = time.perf_counter()
        res = fn(*args, **kw)
        res.seconds = time.perf_counter() - t0
        return res
    run.__name__ = fn.__name__
    run.__doc__ = fn.__doc__
    return run


# -- 1, 2: stable core and the potential identity -------------------------------

@_timed
def check_stable_core(cfg: VerifyConfig | None = None) -> CheckResult:
    """Normalisation (1e-6), Laplace transform (1e-5), beta = 1/2 closed form (1e-8 relative)."""
    res = CheckResult("C1", "stable density: normalisation, Laplace transform, closed form", budget=10.0)
    for beta in (0.3, 0.5, 0.7, 0.9):
        p = StableParams(beta)
        r = integrate_1d(lambda t: stable_pdf(p, t), 0, np.inf, QuadratureSpec(rel_tol=1e-9, tail_exponent=beta))
        res.add(f"norm beta={beta}", r.value, 1.0, 1e-6)
        for s in (0.5, 1.0, 2.0):
            r = integrate_1d(lambda t: np.exp(-s * t) * stable_pdf(p, t), 0, np.inf, QuadratureSpec(rel_tol=1e-9))
            res.add(f"laplace beta={beta} s={s}", r.value, stable_laplace(p, 1.0, s), 1e-5)
    t = np.geomspace(0.01, 100.0, 200)
    for u in (0.5, 1.0, 3.0):
        got = stable_pdf(StableParams(0.5), t, u)
        want = u / (2 * np.sqrt(np.pi)) * t ** -1.5 * np.exp(-u * u / (4 * t))
        rel = np.abs(got / want - 1)
        k = int(np.argmax(rel))
        res.add(f"closed form u={u} worst t={t[k]:.4g}", got[k], want[k], 1e-8, error=rel[k])
    return res


@_timed
def check_potential_identity(cfg: VerifyConfig | None = None) -> CheckResult:
    """int_0^inf g(t, u) du = t^(beta-1)/Gamma(beta), 1e-4 relative, 9 pairs."""
    res = CheckResult("C2", "potential identity", budget=10.0)
    for beta in (0.3, 0.5, 0.7):
        p = StableParams(beta)
        for t in (0.5, 1.0, 2.0):
            r = integrate_1d(lambda u: stable_pdf(p, t, u), 0, np.inf, QuadratureSpec(rel_tol=1e-9))
            want = t ** (beta - 1) / gamma(beta)
            res.add(f"beta={beta} t={t}", r.value, want, 1e-4, error=abs(r.value / want - 1))
    return res


# -- 3: mass conservation ---------------------------------------------------------

@_timed
def check_mass(cfg: VerifyConfig | None = None) -> CheckResult:
    cfg = cfg or VerifyConfig()
    res = CheckResult("C3", "mass conservation", budget=180.0)
    edges = np.linspace(0.0, 30.0, 121)
    for beta in (0.3, 0.5, 0.7):
        for name, make in (("Example1", ModelSpec.example1), ("Example2", ModelSpec.example2)):
            m = make(beta)
            for t in cfg.mass_times:
                laws = {
                    "p from (0,0)": p_kernel(m, t, StateXV(0.0, 0.0)),
                    "p from (0.5,0.4)": p_kernel(m, t, StateXV(0.5, 0.4)),
                    "q from (0,0)": q_kernel(m, t, StateYR(0.0, 0.0)),
                    "q from (-1,t/2)": q_kernel(m, t, StateYR(-1.0, 0.5 * t)),
                    "q from (0,t)": q_kernel(m, t, StateYR(0.0, t)),
                    "joint xyvr": joint_xyvr(m, 0.2, 0.1, 0.1 + t),
                }
                for item, k in laws.items():
                    res.add(f"{name} beta={beta} t={t} {item}", total_mass(k), 1.0, 1e-3)
        g = joint_inverse_two_times(StableParams(beta), 1.0, 2.0, edges, edges)
        res.add(f"two-time beta={beta} times=(1,2) grid [0,30]^2", g.total_mass(), 1.0, 1e-3)
    return res


# -- 4: Chapman-Kolmogorov ------------------------------------------------------------

@_timed
def check_chapman_kolmogorov(cfg: VerifyConfig | None = None) -> CheckResult:
    """Composed vs direct kernels on 30 x 30 grids, 1e-3 absolute density error."""
    res = CheckResult("C4", "Chapman-Kolmogorov", budget=180.0)
    t1, t2 = 0.7, 0.5
    t = t1 + t2
    for beta in (0.5,):
        m1, m2 = ModelSpec.example1(beta), ModelSpec.example2(beta)
        # Example1 P from (0, 0) on an (x, v) grid
        x = np.linspace(0.05, 3.0, 30)
        v = np.linspace(0.02, t - 0.02, 30)
        X, V = np.meshgrid(x, v, indexing="ij")
        comp = compose_p_example1(beta, t1, t2, X.ravel(), V.ravel())
        direct = p_kernel(m1, t, StateXV(0.0, 0.0)).part(V.ravel(), X.ravel())
        res.add(f"Example1 P beta={beta} max over (x,v)", np.max(np.abs(comp - direct)), 0.0, 1e-3)
        # Example1 Q from (0, 0) on a (y, r) grid
        y = np.linspace(0.05, 3.0, 30)
        r = np.linspace(0.05, 3.0, 30)
        Y, R = np.meshgrid(y, r, indexing="ij")
        comp = compose_q_example1(beta, t1, t2, Y.ravel(), R.ravel())
        direct = q_kernel(m1, t, StateYR(0.0, 0.0)).part(R.ravel(), Y.ravel())
        res.add(f"Example1 Q beta={beta} max over (y,r)", np.max(np.abs(comp - direct)), 0.0, 1e-3)
        # Example2: the position is slaved to the age, so the grid is (start age, age)
        worst = 0.0
        for v0 in np.linspace(0.0, 2.0, 30):
            k = p_kernel(m2, t, StateXV(0.0, v0))
            vv = np.linspace(0.02, t - 0.02, 30)
            worst = max(worst, float(np.max(np.abs(compose_p_example2(beta, t1, t2, v0, vv) - k.part(vv)))))
        res.add(f"Example2 P beta={beta} max over (v0,v)", worst, 0.0, 1e-3)
        worst = 0.0
        for r0 in np.linspace(0.0, 1.5, 30):
            k = q_kernel(m2, t, StateYR(0.0, r0))
            rr = np.linspace(0.02, 3.0, 30)
            comp = compose_q_example2(beta, t1, t2, r0, rr)
            direct = k.part(rr) if k.part is not None else np.zeros_like(rr)
            worst = max(worst, float(np.max(np.abs(comp - direct))))
        res.add(f"Example2 Q beta={beta} max over (r0,r)", worst, 0.0, 1e-3)
    return res


# -- 5: two-time law vs Monte Carlo -----------------------------------------------------

@lru_cache(maxsize=2)
def _two_time_sample(n_paths: int, seed: int, du: float, workers):
    return simulate_renewal(ModelSpec.example1(0.5), [1.0, 2.0], n_paths, seed, du=du, workers=workers)


def extrapolated_frequencies(s, x_edges, y_edges):
    """Richardson-combined cell frequencies and coincidence: 2 F(du) - F(2 du), per path."""
    out = []
    for coarse in (False, True):
        e = s.e(coarse=coarse)
        same = s.coincident(0, 1, coarse=coarse)
        h = histogram2d(e[:, 0], e[:, 1], x_edges, y_edges, coincident=same)
        ix = np.searchsorted(x_edges, e[:, 0], side="right") - 1
        iy = np.searchsorted(y_edges, e[:, 1], side="right") - 1
        ok = ~same & (ix >= 0) & (ix < x_edges.size - 1) & (iy >= 0) & (iy < y_edges.size - 1)
        cell = np.where(ok, ix * (y_edges.size - 1) + iy, -1)
        out.append((h, cell, same))
    (hf, cf, sf), (hc, cc, sc) = out
    n = s.n_paths
    freq = 2 * hf.frequencies - hc.frequencies
    coinc = 2 * hf.coincidence - hc.coincidence
    # empirical variance of the per-path weights 2 1{fine} - 1{coarse}
    ncell = freq.size
    m2 = (4 * np.bincount(cf[cf >= 0], minlength=ncell) + np.bincount(cc[cc >= 0], minlength=ncell)
          - 4 * np.bincount(cf[(cf >= 0) & (cf == cc)], minlength=ncell)) / n
    var = np.clip(m2.reshape(freq.shape) - freq ** 2, 0, None)
    w = 2.0 * sf - sc
    return freq, var, coinc, float(w.var())


@_timed
def check_two_time_mc(cfg: VerifyConfig) -> CheckResult:
    """Quadrature cell masses vs Monte Carlo frequencies, 3 standard errors per cell and for the diagonal."""
    res = CheckResult("C5", "two-time law vs Monte Carlo", budget=300.0)
    x_edges, y_edges = TWO_TIME_X, TWO_TIME_Y
    if cfg.quick:
        x_edges, y_edges = x_edges[::2], y_edges[::2]
    grid = joint_inverse_two_times(StableParams(0.5), 1.0, 2.0, x_edges, y_edges)
    s = _two_time_sample(cfg.two_time_paths, cfg.seed, cfg.du, cfg.workers)
    freq, var, coinc, coinc_var = extrapolated_frequencies(s, x_edges, y_edges)
    n = s.n_paths
    p = grid.cell_masses
    se = np.sqrt(np.maximum(p * (1 - p), var) / n)
    for i in range(p.shape[0]):
        for j in range(p.shape[1]):
            item = f"cell x[{x_edges[i]:.3g},{x_edges[i + 1]:.3g}] y[{y_edges[j]:.3g},{y_edges[j + 1]:.3g}]"
            res.add(item, freq[i, j], p[i, j], 3 * se[i, j])
    law = TwoTimeLaw(0.5, 1.0, 2.0)
    diag = integrate_1d(lambda x: law.diagonal_density(x), 0.0, np.inf, QuadratureSpec(rel_tol=1e-10)).value
    se_d = np.sqrt(max(diag * (1 - diag), coinc_var) / n)
    res.add("diagonal mass (coincidence fraction)", coinc, diag, 3 * se_d)
    z = (freq - p) / np.where(se > 0, se, 1.0)
    res.notes = (f"n={n}, du={cfg.du}; cells beyond 3 SE: {int(np.sum(np.abs(z) > 3))} of {p.size}; "
                 f"max |z| = {np.max(np.abs(z)):.3g}; diagonal z = {(coinc - diag) / se_d:.3g}")
    return res


# -- 6: marginals and the mean ---------------------------------------------------------

@_timed
def check_marginals(cfg: VerifyConfig | None = None) -> CheckResult:
    res = CheckResult("C6", "two-time marginals and E[E_1]", budget=60.0)
    pts = np.linspace(0.05, 3.0, 20)
    for beta in (0.3, 0.5, 0.7):
        law = TwoTimeLaw(beta, 1.0, 2.0)
        p = StableParams(beta)
        dx = np.abs(law.x_marginal(pts) - inverse_stable_pdf(p, 1.0, pts))
        dy = np.abs(law.y_marginal(pts) - inverse_stable_pdf(p, 2.0, pts))
        k = int(np.argmax(dx))
        res.add(f"x-marginal beta={beta} worst x={pts[k]:.3g}", law.x_marginal(pts[k:k + 1])[0],
                inverse_stable_pdf(p, 1.0, pts[k]), 1e-3)
        k = int(np.argmax(dy))
        res.add(f"y-marginal beta={beta} worst y={pts[k]:.3g}", law.y_marginal(pts[k:k + 1])[0],
                inverse_stable_pdf(p, 2.0, pts[k]), 1e-3)
        res.add(f"E[E_1] beta={beta}", moments(inverse_subordinator_law(beta, 1.0), {"x": 1}),
                1 / gamma(1 + beta), 1e-3)
    edges = np.linspace(0.0, 12.0, 241)
    g = joint_inverse_two_times(StableParams(0.5), 1.0, 2.0, edges, edges)
    res.add("E[E_1] beta=0.5 from the two-time grid", moments(g, {"x": 1}), 1 / gamma(1.5), 1e-3)
    return res


# -- 7: age law -------------------------------------------------------------------------

@_timed
def check_age_law(cfg: VerifyConfig) -> CheckResult:
    res = CheckResult("C7", "Dynkin-Lamperti age law", budget=120.0)
    u = np.linspace(0.05, 0.95, 19)
    t = 2.0
    for name, make in (("Example1", ModelSpec.example1), ("Example2", ModelSpec.example2)):
        for beta in (0.3, 0.5, 0.7):
            k = joint_xyvr(make(beta), 0.0, 0.0, t)
            got = t * marginal_density(k, "v", t * u, rel_tol=1e-8)
            want = np.sin(np.pi * beta) / np.pi * u ** -beta * (1 - u) ** (beta - 1)
            i = int(np.argmax(np.abs(got - want)))
            res.add(f"{name} beta={beta} worst u={u[i]:.3g}", got[i], want[i], 1e-3)
    # Monte Carlo: V_{2-}/2 from the renewal sample of check 5, 20 bins
    s = _two_time_sample(cfg.two_time_paths, cfg.seed, cfg.du, cfg.workers)
    w = s.v()[:, 1] / t
    edges = np.linspace(0.0, 1.0, 21)
    freq = np.histogram(w, edges)[0] / w.size
    prob = np.diff(betainc(0.5, 0.5, edges))  # arcsine law at beta = 1/2
    se = np.sqrt(prob * (1 - prob) / w.size)
    for i in range(edges.size - 1):
        res.add(f"MC bin [{edges[i]:.2f},{edges[i + 1]:.2f}]", freq[i], prob[i], 3 * se[i])
    return res


# -- 8: pre-limit convergence ---------------------------------------------------------

KS_NULL_SD = 0.2603  # standard deviation of the limiting Kolmogorov distribution


@_timed
def check_prelimit(cfg: VerifyConfig) -> CheckResult:
    res = CheckResult("C8", "pre-limit CTRW convergence", budget=300.0)
    scales = sorted(cfg.ctrw_scales)
    c_max = scales[-1]
    factors = tuple(int(round(c_max / c)) for c in scales)
    s = simulate_ctrw(ModelSpec.example1(0.5), CtrwConfig(c_max), [1.0], cfg.seed + 1, cfg.ctrw_paths,
                      coarsen=factors, workers=cfg.workers)
    tab = density_table(0.5)
    n = cfg.ctrw_paths
    ks = {}
    for c in scales:
        x, _ = s.at_scale(c)
        ks[c] = ks_distance(x[:, 0], lambda z: tab.inverse_cdf(1.0, z))
    noise = 3 * KS_NULL_SD / np.sqrt(n)
    for a, b in zip(scales[:-1], scales[1:]):
        res.add(f"KS(c={b:g}) <= KS(c={a:g}) + noise", ks[b], ks[a], noise, error=max(ks[b] - ks[a], 0.0))
    crit = ks_critical_value(n)
    res.add(f"KS(c={c_max:g}) below 1% critical value, n={n}", ks[c_max], 0.0, crit)
    e2 = simulate_ctrw(ModelSpec.example2(0.5), CtrwConfig(1e3), [0.5, 1.0, 2.0], cfg.seed + 2, cfg.ordering_paths,
                       workers=cfg.workers)
    x, y = e2.at_scale(1e3)
    bad = int(np.sum(~((x < e2.times) & (e2.times < y))))
    res.add(f"Example2 paths violating X < t < Y (of {cfg.ordering_paths} x 3)", bad, 0, 0)
    return res


ALL_CHECKS = (check_stable_core, check_potential_identity, check_mass, check_chapman_kolmogorov,
              check_two_time_mc, check_marginals, check_age_law, check_prelimit)


def run_checks(cfg: VerifyConfig, only=None, progress=None) -> list:
    out = []
    for fn in ALL_CHECKS:
        if only and fn.__name__ not in only:
            continue
        r = fn(cfg)
        if progress:
            progress(r)
        out.append(r)
    return out


def rows_of(results) -> list:
    return [row for r in results for row in r.rows]
