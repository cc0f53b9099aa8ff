import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import gamma

from ctrw_fdd.errors import DomainError, HorizonError, ParameterError
from ctrw_fdd.mc_sim import (CtrwConfig, WaitingLaw, histogram2d, ks_critical_value, ks_distance, read_renewal,
                             sample_path, simulate_ctrw, simulate_renewal, worker_count)
from ctrw_fdd.renewal_kernels import ModelSpec
from ctrw_fdd.stable_core import StableParams, density_table, stable_cdf

EX1 = ModelSpec.example1(0.5)
EX2 = ModelSpec.example2(0.5)
DRIFT = ModelSpec.pure_drift()


# -- single paths ----------------------------------------------------------------

def test_pure_drift_path():
    p = sample_path(DRIFT, 2.0, 100, seed=1)
    np.testing.assert_array_equal(p.a_values, p.u_grid)
    np.testing.assert_array_equal(p.d_values, p.u_grid)
    r = read_renewal(p, 0.7)
    assert (r.e, r.v, r.r, r.g, r.h) == (pytest.approx(0.7), 0.0, 0.0, 0.7, 0.7)


def test_example2_path_coupling():
    p = sample_path(EX2, 3.0, 3000, seed=2)
    np.testing.assert_array_equal(p.a_values, p.d_values)
    q = sample_path(EX2, 3.0, 3000, seed=2, chi=0.5, tau=0.25)
    np.testing.assert_allclose(q.a_values - 0.5, q.d_values - 0.25, rtol=0, atol=1e-12 * q.d_values[-1])


def test_paths_strictly_increasing_and_reproducible():
    p = sample_path(EX1, 1.0, 5000, seed=3)
    assert np.all(np.diff(p.d_values) > 0)
    q = sample_path(EX1, 1.0, 5000, seed=3)
    np.testing.assert_array_equal(p.d_values, q.d_values)


def test_terminal_value_law():
    # D_1 summed from 8 exact increments has the law of D_1
    ends = np.array([sample_path(EX1, 1.0, 8, seed=s, tau=0.5).d_values[-1] for s in range(3000)]) - 0.5
    assert ks_distance(ends, lambda x: stable_cdf(StableParams(0.5), x, 1.0)) < ks_critical_value(ends.size)


def test_example2_readout_identities():
    p = sample_path(EX2, 5.0, 5000, seed=5)
    for t in [0.3, 1.0, 2.5]:
        r = read_renewal(p, t)
        assert r.x == r.g and r.y == r.h
        assert r.g <= t < r.h
        assert r.v == pytest.approx(t - r.g) and r.r == pytest.approx(r.h - t)
        assert r.e_lower < r.e


def test_readout_errors():
    p = sample_path(EX1, 0.01, 10, seed=6)
    with pytest.raises(HorizonError):
        read_renewal(p, 1e6)
    with pytest.raises(DomainError):
        read_renewal(sample_path(EX1, 1.0, 10, seed=6, tau=1.0), 0.5)
    with pytest.raises(ParameterError):
        sample_path(EX1, 1.0, 0, seed=0)


# -- bulk renewal readouts ------------------------------------------------------------

@pytest.fixture(scope="module")
def renewal_ex1():
    return simulate_renewal(EX1, [1.0, 2.0], 100_000, seed=20261016)


def test_bulk_matches_single_path_readout():
    # the bulk grid readouts are a function of the increments only: check the invariants
    s = simulate_renewal(EX1, [0.5, 1.0], 3000, seed=9)
    assert np.all(s.g <= s.times) and np.all(s.times < s.h)
    assert np.all(s.g_coarse <= s.g) and np.all(s.h_coarse >= s.h)
    assert np.all(s.k_coarse % 2 == 0)
    assert np.all((s.k_coarse == s.k) | (s.k_coarse == s.k + 1))


def test_mean_first_passage(renewal_ex1):
    e = renewal_ex1.e_extrapolated()[:, 0]
    se = e.std() / np.sqrt(e.size)
    assert abs(e.mean() - 1 / gamma(1.5)) < 3 * se


def test_grid_refinement(renewal_ex1):
    fine, coarse = renewal_ex1.e()[:, 0], renewal_ex1.e(coarse=True)[:, 0]
    se = fine.std() / np.sqrt(fine.size)
    assert abs(fine.mean() - coarse.mean()) < se


def test_first_passage_law(renewal_ex1):
    tab = density_table(0.5)
    e = renewal_ex1.e()[:, 1]
    assert ks_distance(e, lambda x: tab.inverse_cdf(2.0, x), cdf_nodes=4000) < ks_critical_value(e.size)


def test_coincidence_fraction(renewal_ex1):
    # P(no regeneration in (1, 2]) = 1/2 at beta = 1/2
    c = renewal_ex1.coincident(0, 1).mean()
    assert abs(c - 0.5) < 3 * 0.5 / np.sqrt(renewal_ex1.n_paths)


def test_same_time_is_fully_coincident(renewal_ex1):
    assert renewal_ex1.coincident(0, 0).all()


def test_age_law(renewal_ex1):
    u = renewal_ex1.v()[:, 1] / 2.0
    # generalised arcsine at beta = 1/2 is the arcsine law: F(u) = 2/pi asin(sqrt u)
    assert ks_distance(u, lambda z: 2 / np.pi * np.arcsin(np.sqrt(np.clip(z, 0, 1)))) < ks_critical_value(u.size)


def test_determinism_across_workers(monkeypatch):
    a = simulate_renewal(EX1, [1.0], 40_000, seed=3, workers=1)
    b = simulate_renewal(EX1, [1.0], 40_000, seed=3, workers=2)
    np.testing.assert_array_equal(a.k, b.k)
    np.testing.assert_array_equal(a.h, b.h)
    monkeypatch.setenv("CTRW_FDD_WORKERS", "3")
    assert worker_count(1) == 3


def test_pure_drift_bulk():
    s = simulate_renewal(DRIFT, [0.7], 5, seed=0)
    assert np.all(s.v() == 0) and np.all(s.r() == 0)


def test_renewal_validation():
    with pytest.raises(ParameterError):
        simulate_renewal(EX1, [2.0, 1.0], 10, seed=0)
    with pytest.raises(DomainError):
        simulate_renewal(EX1, [0.5], 10, seed=0, tau=1.0)
    with pytest.raises(HorizonError):
        simulate_renewal(EX1, [100.0], 10, seed=0, u_max=0.01)


# -- pre-limit CTRW -----------------------------------------------------------------

def test_before_first_arrival_stays_at_start():
    s = simulate_ctrw(EX1, CtrwConfig(100.0), [0.5, 1.5], seed=1, n_paths=200, chi=0.3, tau=1.0)
    np.testing.assert_array_equal(s.x[:, 0, 0], 0.3)


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2 ** 32), beta=st.sampled_from([0.3, 0.5, 0.8]))
def test_example2_ordering(seed, beta):
    times = [0.3, 1.0, 2.0]
    s = simulate_ctrw(ModelSpec.example2(beta), CtrwConfig(200.0), times, seed=seed, n_paths=300)
    assert np.all(s.x[:, 0, :] <= s.times) and np.all(s.times < s.y[:, 0, :])


def test_example1_positions_are_lattice_counts():
    c = 50.0
    s = simulate_ctrw(EX1, CtrwConfig(c), [1.0], seed=4, n_paths=500)
    n = s.x[:, 0, 0] * c
    np.testing.assert_allclose(n, np.round(n), atol=1e-9)
    np.testing.assert_allclose(s.y - s.x, 1 / c, atol=1e-12)


def test_coarsening_gives_exact_smaller_scales():
    s = simulate_ctrw(EX1, CtrwConfig(1000.0), [1.0], seed=5, n_paths=20_000, coarsen=(1, 10))
    assert list(s.scales) == [1000.0, 100.0]
    x100, _ = s.at_scale(100.0)
    direct = simulate_ctrw(EX1, CtrwConfig(100.0), [1.0], seed=6, n_paths=20_000)
    # two-sample comparison of the coarsened and directly simulated c = 100 walks
    from scipy.stats import ks_2samp
    assert ks_2samp(x100[:, 0], direct.x[:, 0, 0]).pvalue > 0.001


def test_pareto_waiting_times_converge():
    tab = density_table(0.5)
    cdf = lambda x: tab.inverse_cdf(1.0, x)
    s = simulate_ctrw(EX1, CtrwConfig(1000.0, WaitingLaw.PARETO_TAIL), [1.0], seed=7, n_paths=20_000)
    assert ks_distance(s.x[:, 0, 0], cdf) < ks_critical_value(20_000)


def test_ctrw_validation():
    with pytest.raises(ParameterError):
        CtrwConfig(0.0)
    with pytest.raises(HorizonError):
        simulate_ctrw(EX1, CtrwConfig(10.0, horizon=1.0), [2.0], seed=0, n_paths=1)
    with pytest.raises(ParameterError):
        simulate_ctrw(EX1, CtrwConfig(10.0, "ParetoTail"), [1.0], seed=0, n_paths=1, coarsen=(1, 2))


def test_ctrw_determinism():
    a = simulate_ctrw(EX2, CtrwConfig(100.0), [1.0], seed=8, n_paths=20_000, workers=1)
    b = simulate_ctrw(EX2, CtrwConfig(100.0), [1.0], seed=8, n_paths=20_000, workers=2)
    np.testing.assert_array_equal(a.x, b.x)
    np.testing.assert_array_equal(a.y, b.y)


# -- histogram tools ---------------------------------------------------------------------

def test_histogram_one_cell():
    h = histogram2d([0.5] * 10, [1.5] * 10, [0, 1], [1, 2])
    assert h.frequencies[0, 0] == 1.0 and h.coincidence == 0.0


def test_histogram_coincidence_flag():
    x = np.array([0.1, 0.2, 0.3, 0.4])
    h = histogram2d(x, x + 0.5, [0, 1], [0, 1], coincident=[True, False, False, True])
    assert h.coincidence == 0.5
    assert h.frequencies.sum() == pytest.approx(0.5)
