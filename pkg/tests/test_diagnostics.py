import numpy as np
import pytest

from growthcast.diagnostics import bulk_ess, ess, mcse_mean, split_rhat


def test_rhat_near_one_for_iid():
    x = np.random.default_rng(0).normal(size=(4, 1000))
    assert split_rhat(x) == pytest.approx(1.0, abs=0.01)


def test_rhat_flags_shifted_chain():
    x = np.random.default_rng(1).normal(size=(4, 500))
    x[0] += 3.0
    assert split_rhat(x) > 1.1


def test_rhat_flags_trend_within_chain():
    x = np.random.default_rng(2).normal(size=(1, 1000)) + np.linspace(0, 5, 1000)
    assert split_rhat(x) > 1.1


def test_ess_iid_close_to_n():
    x = np.random.default_rng(3).normal(size=(4, 2000))
    assert 0.8 * 8000 < bulk_ess(x) < 1.2 * 8000


def test_ess_ar1():
    rng = np.random.default_rng(4)
    phi, n = 0.9, 50000
    x = np.empty(n)
    x[0] = 0
    for i in range(1, n):
        x[i] = phi * x[i - 1] + rng.normal()
    # integrated autocorrelation time (1 + phi) / (1 - phi) = 19
    assert ess(x[None]) == pytest.approx(n / 19.0, rel=0.15)


def test_constant_input_is_nan():
    x = np.ones((2, 100))
    assert np.isnan(split_rhat(x)) and np.isnan(ess(x))


def test_mcse():
    x = np.random.default_rng(5).normal(size=(2, 5000))
    assert mcse_mean(x) == pytest.approx(1 / np.sqrt(10000), rel=0.15)
