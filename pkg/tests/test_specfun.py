import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, special

from xpmfocus import specfun as sf


def test_i0_at_zero():
    assert sf.bessel_i0(0.0) == 1.0


def test_i0_matches_integral_representation():
    oracle = integrate.quad(lambda th: math.exp(math.cos(th)), 0, math.pi, epsabs=1e-14)[0] / math.pi
    assert sf.bessel_i0(1.0) == pytest.approx(oracle, rel=1e-12)


@pytest.mark.parametrize("z", np.logspace(-4, 3, 40))
def test_i0e_against_scipy(z):
    assert sf.bessel_i0e(z) == pytest.approx(special.i0e(z), rel=1e-12)


def test_i0_array_and_scalar_types():
    out = sf.bessel_i0(np.array([0.0, 1.0, 2.0]))
    assert out.shape == (3,)
    assert isinstance(sf.bessel_i0(2.0), float)


@pytest.mark.parametrize("bad", [math.nan, math.inf, -1.0])
def test_i0_domain(bad):
    with pytest.raises(ValueError):
        sf.bessel_i0(bad)


def test_i0_bound_at_five():
    assert sf.bessel_i0(5.0) <= math.exp(5) / math.sqrt(5)


def test_upper_bound_values():
    assert sf.bessel_i0_upper_bound(1.0) == pytest.approx(math.e)
    assert sf.bessel_i0(1.0) < math.e
    assert sf.bessel_i0_upper_bound(0.25) == pytest.approx(math.exp(0.25) / 0.5)
    with pytest.raises(ValueError):
        sf.bessel_i0_upper_bound(0.0)


@given(st.floats(1e-3, 1e3))
def test_bessel_bound_holds(z):
    assert sf.log_bessel_i0(z) <= z - 0.5 * math.log(z)


@given(st.floats(0, 50), st.floats(0, 50))
def test_i0_monotone(a, b):
    lo, hi = sorted((a, b))
    assert sf.bessel_i0(lo) <= sf.bessel_i0(hi) * (1 + 1e-15)


def test_e1_against_quadrature():
    oracle = integrate.quad(lambda t: math.exp(-t) / t, 1, np.inf, epsabs=1e-14)[0]
    assert sf.upper_incomplete_gamma0(1.0) == pytest.approx(oracle, rel=1e-12)


@pytest.mark.parametrize("x", [1e-6, 0.1, 0.99, 1.0, 1.01, 3.0, 30.0, 300.0])
def test_e1_against_scipy(x):
    assert sf.upper_incomplete_gamma0(x) == pytest.approx(special.exp1(x), rel=1e-12)


def test_e1_tail_and_domain():
    assert sf.upper_incomplete_gamma0(50.0) < 1e-20
    for bad in (0.0, -1.0):
        with pytest.raises(ValueError):
            sf.upper_incomplete_gamma0(bad)


@given(st.floats(0.01, 20), st.floats(0.01, 20))
def test_e1_decreasing(a, b):
    lo, hi = sorted((a, b))
    assert sf.upper_incomplete_gamma0(lo) >= sf.upper_incomplete_gamma0(hi)


def test_e1_plus_log_limit_is_minus_euler():
    xs = (1e-6, 1e-3, 1e-1, 1.0)
    vals = [sf.upper_incomplete_gamma0(x) + math.log(x) for x in xs]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    assert vals[0] == pytest.approx(-sf.EULER_GAMMA, abs=2e-6)


def test_digamma_integer():
    for k in range(0, 30):
        assert sf.digamma_int(k) == pytest.approx(special.digamma(k + 1), rel=1e-13)


@pytest.mark.parametrize("t", [0.5, 1.0, 2.0, 5.0])
def test_psi_series_identity(t):
    ref = math.exp(t) * (sf.upper_incomplete_gamma0(t) + math.log(t))
    assert sf.psi_exp_series(t, 80) == pytest.approx(ref, rel=1e-8)


@pytest.mark.parametrize("nu", [0.5, 1.0, 2.0, 5.0, 10.0])
def test_expected_log_rician_quadrature(nu):
    f = lambda x: x * math.exp(-0.5 * (x - nu) ** 2) * special.i0e(x * nu) * math.log(x)
    oracle = integrate.quad(f, 0, nu + 40, points=[1.0, nu], epsabs=1e-13, epsrel=1e-12, limit=400)[0]
    assert sf.expected_log_rician(nu) == pytest.approx(oracle, rel=1e-8)


def test_expected_log_rician_special_cases():
    assert sf.expected_log_rician(1.0) == pytest.approx(0.5 * sf.upper_incomplete_gamma0(0.5))
    assert sf.expected_log_rician(30.0) - math.log(30.0) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        sf.expected_log_rician(0.0)


def test_expected_log_rician_monte_carlo():
    rng = np.random.default_rng(5)
    nu = 2.0
    x = np.abs(nu + rng.standard_normal(400_000) + 1j * rng.standard_normal(400_000))
    est = np.log(x)
    assert abs(est.mean() - sf.expected_log_rician(nu)) < 4 * est.std() / math.sqrt(est.size)


def test_marcum_edges():
    assert sf.marcum_q(2.0, 0.0) == 1.0
    assert sf.marcum_q(0.0, 1.5) == pytest.approx(math.exp(-1.125), rel=1e-12)
    with pytest.raises(ValueError):
        sf.marcum_q(-1.0, 1.0)


def test_marcum_quadrature_and_bound():
    a, b = 3.0, 5.0
    f = lambda x: x * math.exp(-0.5 * (x - a) ** 2) * special.i0e(a * x)
    oracle = integrate.quad(f, b, 60, epsabs=1e-14)[0]
    q = sf.marcum_q(a, b)
    assert q == pytest.approx(oracle, rel=1e-9)
    assert q <= math.exp(-2.0)


@given(st.floats(0, 10), st.floats(0, 10))
def test_marcum_bounds(a, b):
    q = sf.marcum_q(a, b)
    assert 0.0 <= q <= 1.0
    if b > a:
        assert q <= math.exp(-0.5 * (b - a) ** 2) + 1e-15
    elif b < a:
        assert 1.0 - q <= math.exp(-0.5 * (a - b) ** 2) + 1e-15


def test_quadrature_spec_validation():
    with pytest.raises(ValueError):
        sf.QuadratureSpec(abs_tol=0.0)
    with pytest.raises(ValueError):
        sf.QuadratureSpec(max_subdivisions=0)


def test_adaptive_quad_complex():
    val = sf.adaptive_quad(lambda t: np.exp(1j * t), 0.0, math.pi, complex_valued=True)
    assert val == pytest.approx(2j, abs=1e-10)
