import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, stats

from growthcast.diagnostics import ess as ess_diag
from growthcast.errors import DomainError, KernelError
from growthcast.samplers import (MetropolisControl, RandomStream, adapt_proposal, draw_gaussian,
                                 draw_gaussian_precision, draw_inverse_gamma, ess_step,
                                 metropolis_step, slice_step)


def test_stream_determinism():
    a, b = RandomStream(7), RandomStream(7)
    assert [a.normal() for _ in range(5)] == [b.normal() for _ in range(5)]
    c, d = RandomStream(7).spawn(2)
    assert c.normal() != d.normal()


def test_uniform_pos_never_zero():
    r = RandomStream(1)
    assert all(0 < r.uniform_pos() <= 1 for _ in range(1000))


def _ess_chain(n, seed=0):
    # prior N(0,1) times likelihood N(x | 2, 1) gives N(1, 0.5)
    r = RandomStream(seed)
    ll = lambda x: -0.5 * (x - 2.0) ** 2
    x, out = 0.0, np.empty(n)
    for i in range(n):
        x = ess_step(x, ll, r)
        out[i] = x
    return out


def test_ess_gaussian_conjugate():
    x = _ess_chain(50000)
    se = math.sqrt(0.5 / ess_diag(x[None]))
    assert abs(x.mean() - 1.0) < 3 * se
    assert abs(x.var() - 0.5) < 0.03


def test_ess_nan_current_raises():
    with pytest.raises(KernelError):
        ess_step(0.0, lambda x: math.nan, RandomStream(0))


def test_ess_returns_point_on_slice():
    r = RandomStream(3)
    ll = lambda x: -abs(x - 1.0)
    for _ in range(200):
        x0 = r.normal()
        u = RandomStream(99)
        x1 = ess_step(x0, ll, u)
        assert math.isfinite(x1)


def _horseshoe_local(u, b2=0.01):
    lam = math.exp(u)
    return -math.log(lam) - b2 / (2 * lam * lam) - math.log1p(lam * lam) + u


def _quad_moment(g):
    z = integrate.quad(lambda u: math.exp(_horseshoe_local(u)), -30, 30, limit=400)[0]
    return integrate.quad(lambda u: g(u) * math.exp(_horseshoe_local(u)), -30, 30, limit=400)[0] / z


def test_slice_matches_quadrature():
    r = RandomStream(11)
    u, us = 0.0, np.empty(40000)
    for i in range(us.size):
        u = slice_step(u, _horseshoe_local, 1.0, rng=r)
        us[i] = u
    m = _quad_moment(lambda v: v)
    sd = math.sqrt(_quad_moment(lambda v: (v - m) ** 2))
    prec = _quad_moment(lambda v: math.exp(-2 * v))
    assert us.mean() == pytest.approx(m, rel=0.02)
    assert us.std() == pytest.approx(sd, rel=0.02)
    assert np.exp(-2 * us).mean() == pytest.approx(prec, rel=0.02)


def test_slice_respects_support():
    r = RandomStream(2)
    x = 0.5
    for _ in range(2000):
        x = slice_step(x, lambda v: -v, 1.0, support_lower=0.0, rng=r)
        assert x > 0


def test_slice_exponential_mean():
    r = RandomStream(4)
    x, xs = 1.0, np.empty(20000)
    for i in range(xs.size):
        x = slice_step(x, lambda v: -v, 1.0, support_lower=0.0, rng=r)
        xs[i] = x
    assert abs(xs.mean() - 1.0) < 4 * math.sqrt(1.0 / ess_diag(xs[None]))


def test_slice_bad_start():
    with pytest.raises(KernelError):
        slice_step(-1.0, lambda v: -v, 1.0, support_lower=0.0, rng=RandomStream(0))
    with pytest.raises(DomainError):
        slice_step(1.0, lambda v: -v, 0.0, rng=RandomStream(0))


def test_metropolis_standard_normal():
    r = RandomStream(5)
    ctl = MetropolisControl(2.4)
    x, xs, acc = 0.0, np.empty(30000), 0
    for i in range(xs.size):
        x, ok = metropolis_step(x, lambda v: -0.5 * v * v, ctl, r)
        xs[i] = x
        acc += ok
    assert abs(xs.mean()) < 4 * math.sqrt(1.0 / ess_diag(xs[None]))
    assert abs(xs.var() - 1.0) < 0.05
    assert 0.3 < acc / xs.size < 0.6


def test_metropolis_nan_proposal_rejected():
    ctl = MetropolisControl(1.0)
    x, ok = metropolis_step(0.0, lambda v: 0.0 if v == 0.0 else math.nan, ctl, RandomStream(0))
    assert x == 0.0 and not ok


def test_adaptation_moves_toward_target():
    ctl = MetropolisControl(1.0, target_acceptance=0.3)
    assert adapt_proposal(ctl, True, 0).proposal_sd > 1.0
    assert adapt_proposal(ctl, False, 0).proposal_sd < 1.0


def test_gaussian_2x2_hand_inverse():
    P = np.array([[4.0, 1.0], [1.0, 3.0]])
    b = np.array([1.0, 2.0])
    inv = np.array([[3.0, -1.0], [-1.0, 4.0]]) / 11.0
    r = RandomStream(8)
    xs = np.array([draw_gaussian_precision(P, b, r) for _ in range(40000)])
    np.testing.assert_allclose(xs.mean(axis=0), inv @ b, atol=0.01)
    np.testing.assert_allclose(np.cov(xs.T), inv, atol=0.01)


def test_precision_scale():
    r = RandomStream(9)
    xs = np.array([draw_gaussian_precision(np.eye(1) * 2.0, [0.0], r, scale=4.0) for _ in range(20000)])
    assert xs.var() == pytest.approx(2.0, rel=0.05)


def test_ill_conditioned_precision_warns():
    P = np.array([[1.0, 1.0 - 1e-15], [1.0 - 1e-15, 1.0]])
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        try:
            draw_gaussian_precision(P, [0.0, 0.0], RandomStream(0))
        except np.linalg.LinAlgError:
            pass
    assert any("ill-conditioned" in str(x.message) for x in w)


def test_draw_gaussian_rejects_asymmetric():
    with pytest.raises(np.linalg.LinAlgError):
        draw_gaussian([0, 0], [[1, 0.5], [0.2, 1]], RandomStream(0))


def test_inverse_gamma_ks():
    r = RandomStream(10)
    xs = [draw_inverse_gamma(3.0, 2.0, r) for _ in range(5000)]
    assert stats.kstest(xs, stats.invgamma(3.0, scale=2.0).cdf).pvalue > 1e-3


def test_inverse_gamma_domain():
    with pytest.raises(DomainError):
        draw_inverse_gamma(0.0, 1.0, RandomStream(0))


@given(st.integers(0, 2**32))
def test_gaussian_draw_is_finite(seed):
    x = draw_gaussian([1.0, -1.0], [[2.0, 0.3], [0.3, 1.0]], RandomStream(seed))
    assert np.all(np.isfinite(x))
