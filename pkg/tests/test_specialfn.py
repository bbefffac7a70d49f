"""Special-function checks against independent oracles (mpmath, direct quadrature)."""
import math

import numpy as np
import pytest
from scipy.integrate import quad

from kscollapse.profiles import EULER_GAMMA, Cutoff, Z0
from kscollapse.specialfn import (
    QuadratureSpec,
    beta_const,
    cubic_moment_Z0,
    expint_Ei,
    gaussian_Z0_closed_form,
    gaussian_Z0_integral,
    heat6_factor,
    one_minus_exp_kernel,
)

# frozen with mpmath.ei at 30 digits
EI_ORACLE = {
    -0.01: -4.03792957653811381117712962355,
    -1.0: -0.21938393439552027367716377546,
    -3.0: -0.0130483810941970374125007458286,
    -7.0: -0.000115481731610338216431011456044,
    -20.0: -9.8355252906498816903969871089e-11,
}


@pytest.mark.parametrize("x,expected", sorted(EI_ORACLE.items()))
def test_ei_against_mpmath_oracle(x, expected):
    assert expint_Ei(x) == pytest.approx(expected, rel=1e-12)


def test_ei_rejects_nonnegative():
    with pytest.raises(ValueError):
        expint_Ei(0.0)
    with pytest.raises(ValueError):
        expint_Ei(1.0)


def test_ei_small_argument_expansion():
    # Ei(-x) = gamma + ln x + O(x); remainder bounded by 1.1 x
    for x in (1e-3, 1e-2):
        err = abs(expint_Ei(-x) - (EULER_GAMMA + math.log(x)))
        assert err <= 1.1 * x


def test_ei_monotone_decreasing_on_negative_axis():
    # dEi/dx = e^x/x < 0 for x < 0: Ei falls from 0^- toward -inf as x -> 0^-
    xs = np.sort(-np.geomspace(1e-3, 30.0, 60))
    vals = expint_Ei(xs)
    assert np.all(np.diff(vals) < 0.0)


@pytest.mark.parametrize("x", [-0.1, -1.0, -3.0])
def test_ei_derivative_is_exp_over_x(x):
    h = 1e-6 * abs(x)
    fd = (expint_Ei(x + h) - expint_Ei(x - h)) / (2.0 * h)
    assert fd == pytest.approx(math.exp(x) / x, rel=1e-6)


def test_gaussian_Z0_at_a10_matches_closed_form():
    val = gaussian_Z0_integral(10.0)
    closed = gaussian_Z0_closed_form(10.0)
    assert closed == pytest.approx(8.83e-4, rel=2e-3)
    assert val == pytest.approx(closed, rel=1e-2)


def test_gaussian_Z0_remainder_scaling():
    # Remainder is O(ln a / a^6): the scaled discrepancy stays bounded by one constant
    scaled = []
    for a in (10.0, 30.0, 100.0, 300.0):
        diff = abs(gaussian_Z0_integral(a) - gaussian_Z0_closed_form(a))
        scaled.append(diff * a**6 / math.log(a))
    assert max(scaled) < 60.0


def test_gaussian_Z0_rejects_small_a():
    with pytest.raises(ValueError):
        gaussian_Z0_integral(0.5)


def test_cubic_moment_exact_value():
    assert cubic_moment_Z0(1.0) == pytest.approx(6.0 - 8.0 * math.log(2.0), abs=1e-12)
    assert cubic_moment_Z0(0.0) == 0.0


def test_cubic_moment_vs_direct_quadrature():
    val, _ = quad(lambda z: z**3 * Z0(z), 0.0, 5.0, epsabs=1e-13, epsrel=1e-13)
    assert abs(cubic_moment_Z0(5.0) - val) < 1e-10


def test_heat6_factor_limits():
    assert heat6_factor(0.0) == pytest.approx(1.0 / 32.0, abs=1e-12)
    assert heat6_factor(1e-9) == pytest.approx(1.0 / 32.0, abs=1e-12)
    assert heat6_factor(2.0) == pytest.approx((1.0 - 2.0 * math.exp(-1.0)) / 16.0, rel=1e-12)
    w = 1e4
    assert heat6_factor(w) == pytest.approx(1.0 / w**4, rel=1e-6)


def test_heat6_factor_monotone_bounded():
    w = np.linspace(0.0, 50.0, 5001)
    v = heat6_factor(w)
    assert np.all(v > 0.0)
    assert np.all(v <= 1.0 / 32.0 + 1e-15)
    assert np.all(np.diff(v) <= 1e-15)


def test_one_minus_exp_kernel_matches_direct():
    x = np.geomspace(1e-8, 30.0, 300)
    direct = 1.0 - np.exp(-x) * (1.0 + x)
    ours = one_minus_exp_kernel(x)
    # relative agreement where direct is well conditioned
    big = x > 1e-3
    assert np.max(np.abs(ours[big] / direct[big] - 1.0)) < 1e-9
    assert abs(one_minus_exp_kernel(1e-6) / (0.5e-12 - 1e-18 / 3.0) - 1.0) < 1e-6


def test_beta_default_profile_in_bracket():
    beta = beta_const(Cutoff())
    assert 0.125 < beta < 0.625


def test_beta_sharp_indicator_is_half():
    beta = beta_const(lambda s: np.where(np.asarray(s) <= 1.0, 1.0, 0.0), support=(1.0, 1.0))
    assert beta == pytest.approx(0.5, abs=1e-14)


def test_beta_stable_under_tolerance_tightening():
    loose = beta_const(Cutoff(), QuadratureSpec(abs_tol=1e-8, rel_tol=1e-6))
    tight = beta_const(Cutoff(), QuadratureSpec(abs_tol=1e-14, rel_tol=1e-13))
    assert abs(loose - tight) < 1e-10


def test_quadrature_spec_validation():
    with pytest.raises(ValueError):
        QuadratureSpec(abs_tol=0.0)
    with pytest.raises(ValueError):
        QuadratureSpec(max_subdivisions=0)
