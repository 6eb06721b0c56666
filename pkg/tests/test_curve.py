import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from growthcast import curve
from growthcast.curve import FlatTimeQuery, RichardsParams
from growthcast.errors import DomainError

params = st.builds(RichardsParams,
                   theta1=st.floats(1.0, 1e7),
                   theta2=st.floats(0.01, 2.0),
                   theta3=st.floats(-50.0, 150.0),
                   xi=st.floats(1e-3, 20.0))


def test_flat_time_example():
    p = RichardsParams(10000.0, 0.2, 40.0, 0.5)
    assert curve.flat_time_point(p, FlatTimeQuery(0.9)) == pytest.approx(51.11956, abs=1e-4)


def test_flat_time_hand_formula():
    p = RichardsParams(10000.0, 0.2, 40.0, 0.5)
    hand = 40.0 - math.log(((1 / 0.9) ** 0.5 - 1) / 0.5) / 0.2
    assert curve.flat_time_point(p, 0.9) == pytest.approx(hand, rel=1e-12)


def test_logistic_limit():
    t = np.linspace(-100, 200, 1000)
    p = RichardsParams(5000.0, 0.13, 45.0, 1.0)
    np.testing.assert_allclose(curve.richards(t, p), curve.logistic(t, 5000.0, 0.13, 45.0),
                               rtol=1e-12, atol=0)


def test_gompertz_limit():
    t = np.linspace(-10, 90, 1001)
    p = RichardsParams(5000.0, 0.13, 40.0, 1e-8)
    g = curve.gompertz(t, 5000.0, 0.13, 40.0)
    assert np.max(np.abs(curve.richards(t, p) - g)) / np.max(np.abs(g)) < 1e-4


def test_midpoint_value():
    # at t = theta3 the bracket is 1 + xi
    p = RichardsParams(100.0, 0.3, 12.0, 2.0)
    assert curve.richards(12.0, p) == pytest.approx(100.0 * 3.0 ** -0.5, rel=1e-14)


def test_extreme_exponent_is_finite():
    p = RichardsParams(1.0, 5.0, 100.0, 0.1)
    v = curve.richards(np.array([-1e4, 0.0, 1e4]), p)
    assert np.all(np.isfinite(v))
    assert v[0] == 0.0 and v[2] == pytest.approx(1.0)


@pytest.mark.parametrize("bad", [0.0, -1.0, math.nan])
def test_xi_must_be_positive(bad):
    with pytest.raises(DomainError):
        RichardsParams(1.0, 0.1, 1.0, bad)


@pytest.mark.parametrize("gamma", [0.0, 1.0, 1.5, -0.1])
def test_gamma_range(gamma):
    with pytest.raises(DomainError):
        FlatTimeQuery(gamma)


def test_zero_rate_has_no_flat_time():
    with pytest.raises(DomainError):
        curve.flat_time_point(RichardsParams(1.0, 0.0, 1.0, 1.0), 0.9)


def test_nonfinite_time_rejected():
    with pytest.raises(DomainError):
        curve.richards(np.array([1.0, np.inf]), RichardsParams(1.0, 0.1, 1.0, 1.0))


@given(params, st.floats(0.01, 0.9999))
def test_flat_time_inverts_curve(p, gamma):
    t = curve.flat_time_point(p, gamma)
    assert curve.richards(t, p) == pytest.approx(gamma * p.theta1, rel=1e-9)


@given(params, st.floats(0.5, 0.99), st.floats(0.001, 0.009))
def test_flat_time_monotone_in_gamma(p, g, dg):
    assert curve.flat_time_point(p, g + dg) > curve.flat_time_point(p, g)


@given(params)
def test_curve_increasing_and_bounded(p):
    t = np.linspace(p.theta3 - 30, p.theta3 + 30, 200)
    f = curve.richards(t, p)
    assert np.all(np.diff(f) >= 0)
    assert np.all(f <= p.theta1 * (1 + 1e-12)) and np.all(f >= 0)


def test_vectorized_flat_times_match_scalar():
    rng = np.random.default_rng(0)
    th2 = rng.uniform(0.05, 0.5, 50)
    th3 = rng.uniform(10, 60, 50)
    xi = np.exp(rng.normal(size=50))
    v = curve.flat_time_points(th2, th3, xi, 0.99)
    s = [curve.flat_time_point(RichardsParams(1.0, a, b, c), 0.99) for a, b, c in zip(th2, th3, xi)]
    np.testing.assert_allclose(v, s, rtol=1e-13)
