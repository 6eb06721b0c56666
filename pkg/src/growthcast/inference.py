"""Posterior summaries: intervals, forecast bands, flat times, rankings.

Percentiles use linear interpolation between order statistics (numpy's
default rule), so draws 1..100 at level 0.95 give (3.475, 97.525).
"""
import datetime as dt
import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import kernels
from .curve import flat_time_points
from .errors import ContractError, DomainError

LEVEL_BOUNDS = (10000.0, 100000.0)


@dataclass(frozen=True)
class CredibleSummary:
    mean: float
    lower: float
    upper: float
    level: float = 0.95

    def __post_init__(self):
        if not self.lower <= self.upper:
            raise ContractError("credible bounds out of order")


@dataclass(frozen=True)
class ForecastBand:
    times: np.ndarray
    mean_curve: np.ndarray
    lower_curve: np.ndarray
    upper_curve: np.ndarray
    level: float = 0.95

    def __post_init__(self):
        arrays = (self.mean_curve, self.lower_curve, self.upper_curve)
        if not all(np.all(np.isfinite(a)) for a in arrays):
            raise ContractError("forecast band has non-finite values")
        if np.any(self.lower_curve > self.upper_curve):
            raise ContractError("forecast band bounds out of order")

    def __len__(self):
        return self.times.size


@dataclass(frozen=True)
class TravelLevel:
    level: int

    def __post_init__(self):
        if self.level not in (1, 2, 3):
            raise DomainError(f"travel level must be 1, 2 or 3, got {self.level}")


def _check_level(level):
    if not 0.0 < level < 1.0:
        raise DomainError(f"level must lie in (0, 1), got {level}")
    tail = 50.0 * (1.0 - level)
    return tail, 100.0 - tail


def summarize(draws, level=0.95):
    x = np.asarray(draws, dtype=float).ravel()
    if x.size == 0:
        raise ContractError("no draws to summarize")
    if not np.all(np.isfinite(x)):
        raise DomainError("draws must be finite")
    lo, hi = np.percentile(x, _check_level(level))
    return CredibleSummary(float(x.mean()), float(lo), float(hi), level)


def _band(times, curves, level):
    lo, hi = np.percentile(curves, _check_level(level), axis=0)
    return ForecastBand(times, curves.mean(axis=0), lo, hi, level)


def curve_draws(params, times):
    """Rows of theta1 * basis over ``times``; params is (S, 4)."""
    out = np.empty((params.shape[0], times.size))
    for s, (th1, th2, th3, xi) in enumerate(params):
        out[s] = th1 * kernels.basis_series(times, th2, th3, xi)
    return out


def _times(draws, horizon):
    if horizon < 0:
        raise DomainError("horizon must be nonnegative")
    T = int(np.asarray(draws.t).size)
    return np.arange(1, T + int(horizon) + 1, dtype=float)


def extrapolate(draws, unit, horizon=0, include_noise=False, rng=None, level=0.95):
    """Pointwise band of the unit's curve over days 1..T+horizon.

    With ``include_noise`` each draw's curve gets N(0, sigma2) noise added,
    which needs ``rng`` (a RandomStream).
    """
    if len(draws) == 0:
        raise ContractError("no retained draws")
    times = _times(draws, horizon)
    curves = curve_draws(draws.unit_params(unit), times)
    if include_noise:
        if rng is None:
            raise ContractError("include_noise needs a RandomStream")
        sd = np.sqrt(draws.column("sigma2"))
        curves = curves + sd[:, None] * rng.standard_normal(curves.shape)
    return _band(times, curves, level)


def day_to_date(start_date, day):
    """Calendar date containing (possibly fractional) day ``day``; day 1 is ``start_date``."""
    return start_date + dt.timedelta(days=int(math.floor(day)) - 1)


def flat_time_summary(draws, unit, gamma, level=0.95):
    par = draws.unit_params(unit)
    return summarize(flat_time_points(par[:, 1], par[:, 2], par[:, 3], gamma), level)


def final_size_summary(draws, unit, level=0.95, observed_max=None):
    """Summary of theta1; warns when the posterior mean is not above ``observed_max``."""
    s = summarize(draws.unit_params(unit)[:, 0], level)
    if observed_max is not None and s.mean <= observed_max:
        warnings.warn(f"posterior final size for {unit} ({s.mean:.6g}) does not exceed the "
                      f"largest observed count ({observed_max:.6g})", RuntimeWarning)
    return s


def classify(theta1_mean):
    if not math.isfinite(theta1_mean):
        raise DomainError("final size must be finite")
    if theta1_mean <= LEVEL_BOUNDS[0]:
        return TravelLevel(1)
    if theta1_mean <= LEVEL_BOUNDS[1]:
        return TravelLevel(2)
    return TravelLevel(3)


def grand_average_curve(draws, horizon=0, xi="geometric", level=0.95):
    """Band of the curve built from the intercepts of the three regressions.

    The shape has no regression; each draw uses the geometric mean of the
    unit shapes by default, ``"arithmetic"`` for their average, or a fixed
    positive number.
    """
    if len(draws) == 0:
        raise ContractError("no retained draws")
    xis = draws.values[:, 3:4 * draws.N:4]
    if xi == "geometric":
        shape = np.exp(np.log(xis).mean(axis=1))
    elif xi == "arithmetic":
        shape = xis.mean(axis=1)
    else:
        if not float(xi) > 0:
            raise DomainError("fixed xi must be positive")
        shape = np.full(len(draws), float(xi))
    alpha = np.column_stack([draws.column(f"theta{l}/alpha") for l in (1, 2, 3)])
    times = _times(draws, horizon)
    return _band(times, curve_draws(np.column_stack([alpha, shape]), times), level)


def rank_covariates(draws, l, k=None):
    """Top-k covariates of regression ``l`` by |posterior mean|.

    Ties keep column order. Returns (name, signed mean) pairs.
    """
    if l not in (1, 2, 3):
        raise DomainError(f"l must be 1, 2 or 3, got {l}")
    means = draws.coefficient_draws(l).mean(axis=0)
    k = means.size if k is None else int(k)
    if k < 1:
        raise DomainError("k must be positive")
    order = sorted(range(means.size), key=lambda j: (-abs(means[j]), j))
    return [(draws.covariate_names[j], float(means[j])) for j in order[:k]]
