import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from stxdiff import dual as D
from stxdiff.entropy import BoltzmannEntropy, LogisticEntropy, ScaledLogEntropy

wide_w = st.floats(-30, 30, allow_nan=False)
# beyond |w| ~ 15 the states round next to the boundary and s' loses digits
moderate_w = st.floats(-15, 15, allow_nan=False)


@settings(max_examples=200, deadline=None)
@given(arrays(float, (5, 2), elements=wide_w))
def test_logistic_states_strictly_inside(w):
    assert np.all(LogisticEntropy(2).in_domain_w(w))


@settings(max_examples=200, deadline=None)
@given(arrays(float, (5, 2), elements=moderate_w))
def test_logistic_roundtrip(w):
    ent = LogisticEntropy(2)
    assert np.allclose(ent.grad_s(ent.u(w)), w, atol=1e-6)


@settings(max_examples=200, deadline=None)
@given(arrays(float, (7, 1), elements=moderate_w))
def test_scaled_log_roundtrip(w):
    ent = ScaledLogEntropy(2.0)
    rho = ent.u(w)
    assert np.all((rho > 0) & (rho < 2))
    assert np.allclose(ent.grad_s(rho), w, atol=1e-6)


def test_extreme_entropy_variables_stay_finite():
    ent = LogisticEntropy(2)
    w = np.array([[-700.0, 700.0], [800.0, -800.0], [50.0, 50.0], [-50.0, -50.0]])
    rho = ent.u(w)
    assert np.all(np.isfinite(rho))
    assert np.all(np.isfinite(ent.jac_u(w)))
    assert np.all(ent.in_domain_w(w[2:]))


def test_fixed_values():
    assert LogisticEntropy(1).s(np.array([0.5])) == pytest.approx(0.0)
    ent = ScaledLogEntropy(2.0)
    assert ent.s(np.array([1.0])) == pytest.approx(0.0)
    assert ent.grad_s(np.array([1.0]))[0] == pytest.approx(0.0)
    assert ScaledLogEntropy(2.1).s(np.array([1.0])) == pytest.approx(1.1 * np.log(1.1))
    assert BoltzmannEntropy().s(np.array([1.0])) == pytest.approx(0.0)


@pytest.mark.parametrize("ent", [LogisticEntropy(1), LogisticEntropy(2), ScaledLogEntropy(2.0)])
def test_jacobians_match_dual_numbers(ent):
    rng = np.random.default_rng(0)
    w = rng.uniform(-3, 3, size=(6, ent.N))
    _, du = D.jacobian(ent.u, w)
    assert np.allclose(ent.jac_u(w), du, atol=1e-12)
    _, dj = D.jacobian(ent.jac_u, w)
    assert np.allclose(ent.jac_u_deriv(w), dj, atol=1e-12)


@pytest.mark.parametrize("ent", [LogisticEntropy(2), ScaledLogEntropy(2.0)])
def test_hessian_inverts_jac_u(ent):
    rng = np.random.default_rng(1)
    w = rng.uniform(-2, 2, size=(5, ent.N))
    H = ent.hess_s(ent.u(w))
    prod = np.einsum("...ij,...jk->...ik", H, ent.jac_u(w))
    assert np.allclose(prod, np.eye(ent.N), atol=1e-10)


def test_relative_entropy_nonnegative_and_zero_at_reference():
    ent = LogisticEntropy(2)
    g = np.array([0.25, 0.5])
    rng = np.random.default_rng(2)
    rho = ent.u(rng.normal(size=(100, 2)))
    assert np.all(ent.relative_entropy(rho, g) >= -1e-14)
    assert ent.relative_entropy(g, g) == pytest.approx(0.0, abs=1e-15)


def test_dual_arithmetic_and_inverse():
    x = np.array([[0.3, 0.7], [1.2, -0.4]])

    def f(v):
        a = D.matrix([[2.0 + v[..., 0], v[..., 1]], [v[..., 1] * v[..., 0], 3.0 + D.exp(v[..., 1])]])
        return D.matvec(D.inv(a), D.stack([D.log(1.5 + v[..., 0] ** 2), v[..., 1] * 2.0]))

    val, der = D.jacobian(f, x)
    h = 1e-7
    for k in range(2):
        e = np.zeros(2)
        e[k] = h
        fd = (D.jacobian(f, x + e)[0] - D.jacobian(f, x - e)[0]) / (2 * h)
        assert np.allclose(der[..., k], fd, atol=1e-7)
