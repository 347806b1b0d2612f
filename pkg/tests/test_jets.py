import math

import mpmath
import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from roundoff import _jets as J
from roundoff._smooth import smoothstep, smoothstep_integral, smoothstep_jet

K = 6


def taylor(f, x0, K=K):
    return np.array([float(c) for c in mpmath.taylor(f, x0, K)])


def test_mul_matches_truncated_polynomial_product():
    a = np.array([1.0, 2.0, -1.0, 0.5])
    b = np.array([0.3, -1.0, 4.0, 2.0])
    expect = np.polynomial.polynomial.polymul(a, b)[:4]
    assert np.allclose(J.mul(a, b), expect, rtol=0, atol=1e-14)


@given(st.floats(0.2, 3.0))
def test_composed_elementary_functions_match_taylor(x0):
    t = J.variable(x0, K)
    got = J.jexp(J.jsin(t))
    mpmath.mp.dps = 30
    expect = taylor(lambda x: mpmath.exp(mpmath.sin(x)), x0)
    assert np.allclose(got, expect, rtol=1e-12, atol=1e-12)


@given(st.floats(0.1, 5.0), st.floats(-2.5, 2.5))
def test_power_and_reciprocal(x0, b):
    t = J.variable(x0, K)
    mpmath.mp.dps = 30
    assert np.allclose(J.jpow(t, b), taylor(lambda x: x**b, x0), rtol=1e-11, atol=1e-12)
    assert np.allclose(J.recip(t), taylor(lambda x: 1 / x, x0), rtol=1e-11, atol=1e-12)


def test_deriv_and_integrate_are_inverse_up_to_truncation():
    a = J.jcos(J.variable(0.7, K))
    back = J.integrate(J.deriv(a), a[0])
    assert np.allclose(back[:K], a[:K], atol=1e-15)


def test_bivariate_composition_of_distance():
    x0, y0 = 0.3, -0.4
    dx = J.bivariate_variable(np.array(x0), 0, 3)
    dy = J.bivariate_variable(np.array(y0), 1, 3)
    sq = J.bmul(dx, dx) + J.bmul(dy, dy)
    rho = J.bcompose(J.pow_coeffs(sq[0, 0], 0.5, 3), sq)
    r = math.hypot(x0, y0)
    assert abs(rho[0, 0] - r) < 1e-15
    assert abs(J.bderivative(rho, (1, 0)) - x0 / r) < 1e-14
    assert abs(J.bderivative(rho, (0, 2)) - x0**2 / r**3) < 1e-14
    assert abs(J.bderivative(rho, (1, 1)) + x0 * y0 / r**3) < 1e-14


@given(st.floats(-0.5, 1.5))
def test_smoothstep_symmetry_and_range(u):
    s = float(smoothstep(u))
    assert 0.0 <= s <= 1.0
    assert abs(s + float(smoothstep(1.0 - u)) - 1.0) < 1e-15


def test_smoothstep_flat_outside_unit_interval():
    assert np.all(smoothstep(np.array([-1.0, 0.0])) == 0.0)
    assert np.all(smoothstep(np.array([1.0, 2.0])) == 1.0)
    jet = smoothstep_jet(np.array([-0.5, 1.5]), 4)
    assert np.all(jet[1:] == 0.0)


@given(st.floats(0.05, 0.95))
def test_smoothstep_jet_against_taylor(u0):
    mpmath.mp.dps = 40

    def S(u):
        a = mpmath.exp(-1 / u)
        b = mpmath.exp(-1 / (1 - u))
        return a / (a + b)

    assert np.allclose(smoothstep_jet(np.array(u0), 4), taylor(S, u0, 4), rtol=1e-9, atol=1e-9)


def test_smoothstep_integral_against_quadrature():
    mpmath.mp.dps = 30

    def S(u):
        if u <= 0:
            return mpmath.mpf(0)
        a = mpmath.exp(-1 / u)
        b = mpmath.exp(-1 / (1 - u)) if u < 1 else mpmath.mpf(0)
        return a / (a + b)

    for u in (0.25, 0.5, 0.9, 1.0):
        expect = float(mpmath.quad(S, [0, 0.5, u] if u > 0.5 else [0, u]))
        assert abs(float(smoothstep_integral(u)) - expect) < 1e-13
    assert abs(float(smoothstep_integral(1.0)) - 0.5) < 1e-14
