"""Convergence diagnostics: rank-normalized split-Rhat and bulk ESS.

Both take an array of shape (chains, draws).
"""
import numpy as np
from scipy.special import ndtri
from scipy.stats import rankdata


def _split(x):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n = x.shape[1]
    half = n // 2
    if half < 2:
        return x
    return np.vstack([x[:, :half], x[:, n - half:]])


def _rank_normalize(x):
    ranks = rankdata(x, method="average").reshape(x.shape)
    return ndtri((ranks - 0.375) / (x.size + 0.25))


def _rhat(x):
    m, n = x.shape
    if n < 2:
        return np.nan
    means = x.mean(axis=1)
    w = x.var(axis=1, ddof=1).mean()
    b = n * means.var(ddof=1) if m > 1 else 0.0
    if w == 0:
        return np.nan
    var_plus = (n - 1) / n * w + b / n
    return float(np.sqrt(var_plus / w))


def split_rhat(x):
    """Rank-normalized split-Rhat of one scalar."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if np.ptp(x) == 0:
        return np.nan
    return _rhat(_rank_normalize(_split(x)))


def _autocov(x):
    n = x.shape[-1]
    size = 2 ** int(np.ceil(np.log2(2 * n)))
    centered = x - x.mean(axis=-1, keepdims=True)
    f = np.fft.rfft(centered, n=size)
    acov = np.fft.irfft(f * np.conjugate(f), n=size)[..., :n]
    return acov / n


def ess(x):
    """Effective sample size with Geyer's initial monotone sequence."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    m, n = x.shape
    if n < 4 or np.ptp(x) == 0:
        return np.nan
    acov = _autocov(x)
    chain_var = acov[:, 0] * n / (n - 1.0)
    mean_var = chain_var.mean()
    var_plus = mean_var * (n - 1.0) / n
    if m > 1:
        var_plus += x.mean(axis=1).var(ddof=1)
    rho = 1.0 - (mean_var - acov.mean(axis=0)) / var_plus
    rho[0] = 1.0
    # pair sums, truncated at the first non-positive pair, then made monotone
    total = 0.0
    prev = np.inf
    t = 0
    while t + 1 < n:
        pair = rho[t] + rho[t + 1]
        if pair <= 0:
            break
        pair = min(pair, prev)
        total += pair
        prev = pair
        t += 2
    tau = max(-1.0 + 2.0 * total, 1.0 / np.log10(m * n))
    return float(m * n / tau)


def bulk_ess(x):
    """ESS of the rank-normalized split chains."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if np.ptp(x) == 0:
        return np.nan
    return ess(_rank_normalize(_split(x)))


def mcse_mean(x):
    """Monte Carlo standard error of the mean using ESS."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    e = ess(x)
    return float(x.std(ddof=1) / np.sqrt(e))
