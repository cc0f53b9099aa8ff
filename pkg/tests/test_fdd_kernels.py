import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad
from scipy.special import gamma

from ctrw_fdd.errors import DomainError, UnsupportedModelError
from ctrw_fdd.fdd import (Atom, KernelDensity, StateXV, StateYR, compose_p_example1, compose_p_example2,
                          compose_q_example1, compose_q_example2, fdd_chain, inverse_subordinator_law,
                          joint_xyvr, marginal_density, moments, p_kernel, q_kernel, total_mass)
from ctrw_fdd.renewal_kernels import ModelSpec
from ctrw_fdd.stable_core import StableParams, stable_pdf

BETAS = [0.3, 0.5, 0.7]
TIMES = [0.5, 1.0, 2.0]
MODELS = {"ex1": ModelSpec.example1, "ex2": ModelSpec.example2}


def arcsine(beta, u):
    return np.sin(np.pi * beta) / np.pi * u ** -beta * (1 - u) ** (beta - 1)


# -- states and containers ---------------------------------------------------

def test_states_validate():
    with pytest.raises(DomainError):
        StateXV(0.0, -1.0)
    with pytest.raises(DomainError):
        StateYR(0.0, -0.1)
    with pytest.raises(DomainError):
        StateXV(np.nan, 0.0)


def test_single_atom_has_unit_mass():
    k = KernelDensity(("x",), [Atom((0.3,), 1.0)], None)
    assert total_mass(k) == 1.0


def test_negative_atom_weight_rejected():
    with pytest.raises(DomainError):
        KernelDensity(("x",), [Atom((0.0,), -0.1)], None)


# -- mass conservation -------------------------------------------------------

@pytest.mark.parametrize("name", MODELS)
@pytest.mark.parametrize("beta", BETAS)
@pytest.mark.parametrize("t", TIMES)
def test_kernel_masses(name, beta, t):
    m = MODELS[name](beta)
    laws = [p_kernel(m, t, StateXV(0.0, 0.0)), p_kernel(m, t, StateXV(0.5, 0.4)),
            q_kernel(m, t, StateYR(0.0, 0.0)), q_kernel(m, t, StateYR(-1.0, 0.5 * t))]
    for k in laws:
        assert abs(total_mass(k) - 1) < 1e-4
    j = joint_xyvr(m, 0.2, 0.1, 0.1 + t)
    tol = 1e-3 if len(j.part.free) == 3 else 1e-4
    assert abs(total_mass(j) - 1) < tol


def test_q_boundary_branch_has_unit_mass():
    m = ModelSpec.example1(0.5)
    k = q_kernel(m, 1.0, StateYR(0.0, 1.0))
    assert k.part is None and k.atoms[0].location == (0.0, 0.0)
    assert total_mass(k) == 1.0
    # just below the boundary the renewed law carries all the mass
    assert abs(total_mass(q_kernel(m, 1.0, StateYR(0.0, 0.999))) - 1) < 1e-4


# -- documented values -------------------------------------------------------

def test_p_atom_weight_example1():
    k = p_kernel(ModelSpec.example1(0.5), 1.0, StateXV(0.0, 1.0))
    assert len(k.atoms) == 1
    assert k.atoms[0].location == (0.0, 2.0)
    assert k.atoms[0].weight == pytest.approx(2 ** -0.5, rel=1e-14)


def test_q_frozen_atom():
    k = q_kernel(ModelSpec.example1(0.5), 2.0, StateYR(0.7, 5.0))
    assert k.part is None
    assert k.atoms[0].location == (0.7, 3.0) and k.atoms[0].weight == 1.0


@pytest.mark.parametrize("name", MODELS)
def test_degenerate_starts_have_no_atom(name):
    m = MODELS[name](0.5)
    assert p_kernel(m, 1.0, StateXV(0.0, 0.0)).atoms == []
    assert q_kernel(m, 1.0, StateYR(0.0, 0.0)).atoms == []


def test_joint_at_start_time_is_point_mass():
    k = joint_xyvr(ModelSpec.example1(0.5), 0.3, 1.0, 1.0)
    assert k.part is None
    assert k.atoms == [Atom((0.3, 0.3, 0.0, 0.0), 1.0)]


def test_pure_drift():
    m = ModelSpec.pure_drift()
    k = joint_xyvr(m, 0.0, 0.0, 0.7)
    assert k.atoms[0].location == (0.7, 0.7, 0.0, 0.0)
    with pytest.raises(UnsupportedModelError):
        p_kernel(m, 1.0, StateXV(0.0, 0.0))
    with pytest.raises(UnsupportedModelError):
        q_kernel(m, 1.0, StateYR(0.0, 0.0))


def test_domain_errors():
    m = ModelSpec.example1(0.5)
    with pytest.raises(DomainError):
        joint_xyvr(m, 0.0, 1.0, 0.5)
    with pytest.raises(DomainError):
        p_kernel(m, 0.0, StateXV(0.0, 0.0))
    with pytest.raises(DomainError):
        q_kernel(m, -1.0, StateYR(0.0, 0.0))


# -- closed forms and independent routes -------------------------------------

@pytest.mark.parametrize("beta", BETAS)
def test_example2_p_closed_form(beta):
    t, v0 = 1.3, 0.4
    k = p_kernel(ModelSpec.example2(beta), t, StateXV(0.0, v0))
    v = np.linspace(0.02, t - 0.02, 15)
    L = t - v
    want = L ** beta * v ** -beta / ((v0 + L) * gamma(beta) * gamma(1 - beta))
    np.testing.assert_allclose(k.part(v), want, rtol=1e-9)
    assert k.atoms[0].weight == pytest.approx((v0 / (v0 + t)) ** beta)


@pytest.mark.parametrize("beta", BETAS)
def test_example2_q_closed_form(beta):
    t = 0.8
    k = q_kernel(ModelSpec.example2(beta), t, StateYR(0.0, 0.0))
    r = np.geomspace(1e-3, 50, 20)
    want = np.sin(np.pi * beta) / np.pi * t ** beta * r ** -beta / (t + r)
    np.testing.assert_allclose(k.part(r), want, rtol=1e-9)


@pytest.mark.parametrize("beta", [0.4, 0.6])
def test_example1_p_from_positive_age_matches_renewal_decomposition(beta):
    # condition on the length w of the current holding interval, then restart from age 0
    p = StableParams(beta)
    t, v0 = 1.0, 0.5
    k = p_kernel(ModelSpec.example1(beta), t, StateXV(0.0, v0))
    for v, x in [(0.2, 0.3), (0.5, 0.8), (0.05, 0.1)]:
        def f(w):
            s = t - (w - v0) - v
            return beta * v0 ** beta * w ** (-beta - 1) * stable_pdf(p, s, x) * v ** -beta / gamma(1 - beta)
        want = quad(f, v0, v0 + t - v, epsabs=0, epsrel=1e-11, limit=200)[0]
        assert float(k.part(v, x)) == pytest.approx(want, rel=1e-7)


@pytest.mark.parametrize("beta", [0.4, 0.6])
def test_example1_q_density_direct(beta):
    p = StableParams(beta)
    t = 1.2
    k = q_kernel(ModelSpec.example1(beta), t, StateYR(0.0, 0.0))
    for r, y in [(0.3, 0.5), (2.0, 1.0), (0.01, 0.2)]:
        phi = lambda w: beta * w ** (-beta - 1) / gamma(1 - beta)
        want = quad(lambda w: stable_pdf(p, w, y) * phi(r + t - w), 0, t, epsabs=0, epsrel=1e-11, limit=200)[0]
        assert float(k.part(r, y)) == pytest.approx(want, rel=1e-7)


# -- support couplings -------------------------------------------------------

@settings(max_examples=25, deadline=None)
@given(x0=st.floats(-5, 5), v0=st.floats(0, 3), t=st.floats(0.05, 4), beta=st.sampled_from(BETAS))
def test_example2_p_coupling(x0, v0, t, beta):
    k = p_kernel(ModelSpec.example2(beta), t, StateXV(x0, v0))
    for a in k.atoms:
        assert a.location[0] + a.location[1] == pytest.approx(x0 + v0 + t)
    v = np.linspace(0, t, 23)[1:-1]
    pts = k.support_points(v)
    nz = k.on_grid(v) > 0
    np.testing.assert_allclose((pts["x"] + pts["v"])[nz], x0 + v0 + t, rtol=0, atol=1e-12 * (1 + abs(x0) + v0 + t))


@settings(max_examples=25, deadline=None)
@given(y0=st.floats(-5, 5), r0=st.floats(0, 3), t=st.floats(0.05, 4), beta=st.sampled_from(BETAS))
def test_example2_q_coupling(y0, r0, t, beta):
    k = q_kernel(ModelSpec.example2(beta), t, StateYR(y0, r0))
    if r0 > t:
        assert k.atoms[0].location == (y0, r0 - t)
        return
    if k.part is None:
        return
    r = np.geomspace(1e-3, 10, 17)
    pts = k.support_points(r)
    nz = k.on_grid(r) > 0
    np.testing.assert_allclose((pts["y"] - pts["r"])[nz], y0 + t - r0, rtol=0, atol=1e-12 * (1 + abs(y0) + r0 + t))


def test_example2_joint_support():
    t = 1.5
    k = joint_xyvr(ModelSpec.example2(0.5), 0.0, 0.0, t)
    v, r = np.linspace(0.1, 1.4, 5), np.linspace(0.1, 3, 6)
    pts = k.support_points(v, r)
    np.testing.assert_allclose(pts["x"], t - pts["v"])
    np.testing.assert_allclose(pts["y"], t + pts["r"])


def test_example2_q_origin_support():
    k = q_kernel(ModelSpec.example2(0.5), 1.0, StateYR(0.0, 0.0))
    pts = k.support_points(np.array([0.1, 0.5, 2.0]))
    np.testing.assert_allclose(pts["y"], 1.0 + pts["r"])


# -- age law -----------------------------------------------------------------

def test_age_density_at_midpoint():
    k = joint_xyvr(ModelSpec.example1(0.5), 0.0, 0.0, 1.0)
    assert marginal_density(k, "v", [0.5])[0] == pytest.approx(2 / np.pi, abs=1e-6)


@pytest.mark.parametrize("name", MODELS)
@pytest.mark.parametrize("beta", [0.3, 0.7])
def test_age_over_time_is_generalised_arcsine(name, beta):
    t = 2.0
    k = joint_xyvr(MODELS[name](beta), 0.0, 0.0, t)
    u = np.linspace(0.05, 0.95, 7)
    got = t * marginal_density(k, "v", t * u, rel_tol=1e-7)
    np.testing.assert_allclose(got, arcsine(beta, u), rtol=0, atol=1e-3)


# -- moments -----------------------------------------------------------------

@pytest.mark.parametrize("beta", BETAS)
@pytest.mark.parametrize("t", [1.0, 2.0])
def test_mean_inverse_subordinator(beta, t):
    law = inverse_subordinator_law(beta, t)
    assert moments(law, {}) == pytest.approx(1.0, abs=1e-8)
    assert moments(law, {"x": 1}) == pytest.approx(t ** beta / gamma(1 + beta), abs=1e-6)


# -- Chapman-Kolmogorov --------------------------------------------------------

def test_ck_example1_p():
    beta, t1, t2 = 0.5, 0.7, 0.5
    x = np.array([0.1, 0.4, 0.9, 0.3, 1.5])
    v = np.array([0.1, 0.3, 0.45, 0.8, 1.1])
    direct = p_kernel(ModelSpec.example1(beta), t1 + t2, StateXV(0.0, 0.0)).part(v, x)
    np.testing.assert_allclose(compose_p_example1(beta, t1, t2, x, v), direct, rtol=0, atol=1e-5)


def test_ck_example1_q():
    beta, t1, t2 = 0.6, 0.5, 0.8
    y = np.array([0.2, 0.6, 1.0])
    r = np.array([0.1, 0.7, 2.0])
    direct = q_kernel(ModelSpec.example1(beta), t1 + t2, StateYR(0.0, 0.0)).part(r, y)
    np.testing.assert_allclose(compose_q_example1(beta, t1, t2, y, r), direct, rtol=0, atol=1e-5)


@pytest.mark.parametrize("v0", [0.0, 0.2, 1.0])
def test_ck_example2_p(v0):
    beta, t1, t2 = 0.4, 0.6, 0.9
    v = np.linspace(0.03, 1.47, 9)
    direct = p_kernel(ModelSpec.example2(beta), t1 + t2, StateXV(0.0, v0)).part(v)
    np.testing.assert_allclose(compose_p_example2(beta, t1, t2, v0, v), direct, rtol=0, atol=1e-6)


@pytest.mark.parametrize("r0", [0.0, 0.3, 0.9])
def test_ck_example2_q(r0):
    beta, t1, t2 = 0.7, 0.6, 0.9
    r = np.geomspace(0.01, 5, 9)
    k = q_kernel(ModelSpec.example2(beta), t1 + t2, StateYR(0.0, r0))
    np.testing.assert_allclose(compose_q_example2(beta, t1, t2, r0, r), k.part(r), rtol=0, atol=1e-6)


# -- chains ------------------------------------------------------------------

def test_chain_single_time_is_joint_marginal():
    m = ModelSpec.example1(0.5)
    ch = fdd_chain(m, 0.0, 0.0, [1.0])
    j = joint_xyvr(m, 0.0, 0.0, 1.0)
    for v, x in [(0.3, 0.4), (0.8, 1.1)]:
        want = quad(lambda r: float(j.part(v, r, x)), 0, np.inf, epsabs=0, epsrel=1e-10, limit=200)[0]
        assert ch.continuous_density([StateXV(x, v)]) == pytest.approx(want, rel=1e-7)


def test_chain_validation():
    m = ModelSpec.example1(0.5)
    with pytest.raises(DomainError):
        fdd_chain(m, 0.0, 0.0, [2.0, 1.0])
    with pytest.raises(DomainError):
        fdd_chain(m, 0.0, 1.0, [0.5, 2.0])
    with pytest.raises(UnsupportedModelError):
        fdd_chain(ModelSpec.pure_drift(), 0.0, 0.0, [1.0])


def test_chain_middle_time_marginalises_out_example2():
    # chain over (1, 1.5, 2) integrated over the middle state equals the chain over (1, 2)
    beta = 0.5
    m = ModelSpec.example2(beta)
    two = fdd_chain(m, 0.0, 0.0, [1.0, 2.0])
    for v1 in [0.2, 0.6, 0.9]:
        v3 = np.linspace(0.05, 0.95, 7)
        x1 = 1.0 - v1
        direct = np.array([two.continuous_density([StateXV(x1, v1), StateXV(x1 + v1 + 1 - w, w)]) for w in v3])
        p1 = float(two.initial.part(v1))
        three = p1 * compose_p_example2(beta, 0.5, 0.5, v1, v3)
        np.testing.assert_allclose(three, direct, rtol=0, atol=1e-6)
