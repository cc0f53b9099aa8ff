import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import gamma

from ctrw_fdd.errors import DomainError, ParameterError, UnsupportedModelError
from ctrw_fdd.quadrature import QuadratureSpec, integrate_1d
from ctrw_fdd.renewal_kernels import (ModelKind, ModelSpec, PotentialKind, conditional_jump_density,
                                      conditional_jump_tail, jump_displacement, levy_density,
                                      levy_tail, potential)
from ctrw_fdd.stable_core import StableParams, stable_pdf

HALF = StableParams(0.5)
betas = st.floats(0.05, 0.95)
positive = st.floats(1e-3, 1e3)


def test_levy_tail_values():
    assert levy_tail(HALF, 1.0) == pytest.approx(1 / np.sqrt(np.pi))
    assert levy_tail(HALF, 4.0) == pytest.approx(0.5 / np.sqrt(np.pi))
    with pytest.raises(DomainError):
        levy_tail(HALF, 0.0)


@given(beta=betas, v1=positive, v2=positive)
def test_levy_tail_decreasing(beta, v1, v2):
    p = StableParams(beta)
    if v1 < v2:
        assert levy_tail(p, v1) > levy_tail(p, v2)


@pytest.mark.parametrize("beta", [0.3, 0.5, 0.7])
def test_levy_tail_is_integral_of_density(beta):
    p = StableParams(beta)
    r = integrate_1d(lambda w: levy_density(p, w), 2.0, np.inf, QuadratureSpec(rel_tol=1e-12, tail_exponent=beta))
    assert r.value == pytest.approx(levy_tail(p, 2.0), rel=1e-10)


def test_conditional_tail_values():
    assert conditional_jump_tail(HALF, 1.0, 1.0) == pytest.approx(2 ** -0.5)
    assert conditional_jump_tail(HALF, 3.0, 0.0) == 1.0
    assert conditional_jump_tail(HALF, 0.0, 2.0) == 0.0
    assert conditional_jump_tail(HALF, 0.0, 0.0) == 1.0
    with pytest.raises(DomainError):
        conditional_jump_tail(HALF, -1.0, 1.0)


@given(beta=betas, v=positive, t1=positive, t2=positive)
def test_conditional_tail_semigroup(beta, v, t1, t2):
    p = StableParams(beta)
    lhs = conditional_jump_tail(p, v, t1 + t2)
    rhs = conditional_jump_tail(p, v, t1) * conditional_jump_tail(p, v + t1, t2)
    assert lhs == pytest.approx(rhs, rel=1e-13)


def test_conditional_density_values():
    m = ModelSpec.example1(0.5)
    assert conditional_jump_density(m, 1.0, 4.0) == pytest.approx(0.0625)
    assert conditional_jump_density(m, 1.0, 0.5) == 0.0
    with pytest.raises(DomainError):
        conditional_jump_density(m, 0.0, 1.0)


def test_conditional_density_mass():
    m = ModelSpec.example2(0.7)
    r = integrate_1d(lambda w: conditional_jump_density(m, 0.3, w), 0.3, np.inf,
                     QuadratureSpec(rel_tol=1e-13, tail_exponent=0.7))
    assert abs(r.value - 1) < 1e-10


@settings(max_examples=50)
@given(beta=betas, v=positive, extra=st.floats(0, 1e3))
def test_conditional_density_times_tail_is_levy_density(beta, v, extra):
    m = ModelSpec.example1(beta)
    w = v + extra
    lhs = levy_tail(m.stable, v) * conditional_jump_density(m, v, w)
    assert lhs == pytest.approx(levy_density(m.stable, w), rel=1e-12)


def test_jump_displacement():
    w = np.array([0.5, 2.0])
    np.testing.assert_array_equal(jump_displacement(ModelSpec.example1(0.5), w), 0.0)
    np.testing.assert_array_equal(jump_displacement(ModelSpec.example2(0.5), w), w)


def test_potential_example1():
    u = potential(ModelSpec.example1(0.5), 0.0, 0.0)
    assert u.kind is PotentialKind.ABSOLUTELY_CONTINUOUS
    assert u.density(1.0, 1.0) == pytest.approx(np.exp(-0.25) / (2 * np.sqrt(np.pi)), rel=1e-12)
    shifted = potential(ModelSpec.example1(0.5), 1.0, 2.0)
    assert shifted.density(0.5, 3.0) == 0.0
    assert shifted.density(2.0, 1.5) == 0.0
    assert shifted.density(2.0, 3.0) == pytest.approx(u.density(1.0, 1.0))


def test_potential_example2():
    u = potential(ModelSpec.example2(0.5), 0.0, 0.0)
    assert u.kind is PotentialKind.SPATIALLY_SINGULAR
    assert u.temporal_density(1.0) == pytest.approx(1 / gamma(0.5))
    assert u.temporal_density(-1.0) == 0.0
    assert u.atom_location(2.5) == 2.5


def test_potential_pure_drift_unsupported():
    with pytest.raises(UnsupportedModelError):
        potential(ModelSpec.pure_drift(), 0.0, 0.0)


@pytest.mark.parametrize("beta", [0.3, 0.5, 0.7])
@pytest.mark.parametrize("t", [0.5, 1.0, 2.0])
def test_occupation_identity(beta, t):
    # int_0^inf g(t, u) du = t^(beta-1)/Gamma(beta)
    p = StableParams(beta)
    r = integrate_1d(lambda u: stable_pdf(p, t, u), 0, np.inf, QuadratureSpec(rel_tol=1e-9))
    assert r.value == pytest.approx(t ** (beta - 1) / gamma(beta), rel=1e-4)


def test_model_spec_validation():
    with pytest.raises(ParameterError):
        ModelSpec(ModelKind.EXAMPLE1)
    with pytest.raises(ParameterError):
        ModelSpec(ModelKind.PURE_DRIFT, StableParams(0.5))
    with pytest.raises(ParameterError):
        ModelSpec(ModelKind.EXAMPLE1, StableParams(0.5), spatial_dimension=2)
    assert ModelSpec("Example2", HALF).coupled
