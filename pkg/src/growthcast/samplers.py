"""Model-agnostic univariate MCMC kernels and exact conjugate draws.

Every kernel takes an explicit :class:`RandomStream`; identical seeds give
bit-identical results.
"""
import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .errors import DomainError, KernelError

MIN_BRACKET = 1e-14


class RandomStream:
    """Seeded PCG64 stream. One per chain; never share across workers."""

    def __init__(self, seed):
        if isinstance(seed, np.random.SeedSequence):
            self.seed = seed.entropy
            self._seq = seed
        else:
            self.seed = int(seed)
            self._seq = np.random.SeedSequence(self.seed & 0xFFFFFFFFFFFFFFFF)
        self.gen = np.random.Generator(np.random.PCG64(self._seq))

    def spawn(self, n):
        return [RandomStream(s) for s in self._seq.spawn(n)]

    def uniform(self, low=0.0, high=1.0):
        return low + (high - low) * self.gen.random()

    def uniform_pos(self):
        """Uniform on (0, 1]; safe to take the log of."""
        return 1.0 - self.gen.random()

    def normal(self, loc=0.0, scale=1.0):
        return loc + scale * self.gen.standard_normal()

    def standard_normal(self, size=None):
        return self.gen.standard_normal(size)

    def exponential(self):
        return self.gen.standard_exponential()

    def gamma(self, shape, size=None):
        return self.gen.standard_gamma(shape, size)


@dataclass(frozen=True)
class MetropolisControl:
    proposal_sd: float
    adapt: bool = True
    target_acceptance: float = 0.3

    def __post_init__(self):
        if not self.proposal_sd > 0:
            raise DomainError("proposal_sd must be positive")
        if not 0 < self.target_acceptance < 1:
            raise DomainError("target_acceptance must lie in (0, 1)")


def adapt_proposal(ctl, accepted, iteration):
    """One Robbins-Monro move of log(proposal_sd) toward the target rate.

    Callers stop invoking this after burn-in so the kernel is then fixed.
    """
    gain = (iteration + 1.0) ** -0.6
    log_sd = math.log(ctl.proposal_sd) + gain * (float(accepted) - ctl.target_acceptance)
    return replace(ctl, proposal_sd=math.exp(min(max(log_sd, -700.0), 700.0)))


def ess_step(current, log_likelihood, rng, current_loglik=None):
    """Elliptical slice update for a target proportional to L(x) N(x | 0, 1).

    The ellipse passes through ``current`` and an auxiliary N(0, 1) draw; the
    angle bracket starts at (-pi, pi] and shrinks toward the current point
    until the proposal clears the slice threshold.
    """
    ll0 = log_likelihood(current) if current_loglik is None else current_loglik
    if math.isnan(ll0):
        raise KernelError("log likelihood is NaN at the current point")
    nu = rng.normal()
    log_y = ll0 + math.log(rng.uniform_pos())
    phi = rng.uniform(-math.pi, math.pi)
    lo, hi = -math.pi, math.pi
    while True:
        prop = current * math.cos(phi) + nu * math.sin(phi)
        ll = log_likelihood(prop)
        if math.isnan(ll):
            raise KernelError("log likelihood is NaN at a proposal")
        if ll > log_y:
            return prop
        if phi > 0:
            hi = phi
        else:
            lo = phi
        if hi - lo < MIN_BRACKET:
            raise KernelError("elliptical slice bracket collapsed")
        phi = rng.uniform(lo, hi)


def slice_step(current, log_density, width, support_lower=None, rng=None,
               max_steps_out=50, current_logp=None):
    """Univariate slice update with stepping-out then shrinkage."""
    if rng is None:
        raise TypeError("slice_step needs a RandomStream")
    if not width > 0:
        raise DomainError("width must be positive")

    def f(x):
        if support_lower is not None and x <= support_lower:
            return -math.inf
        return log_density(x)

    f0 = f(current) if current_logp is None else current_logp
    if not math.isfinite(f0):
        raise KernelError(f"log density not finite at the current point ({f0})")
    log_y = f0 - rng.exponential()
    left = current - width * rng.uniform()
    right = left + width
    j = int(max_steps_out * rng.uniform())
    k = max_steps_out - 1 - j
    while j > 0 and f(left) > log_y:
        left -= width
        j -= 1
    while k > 0 and f(right) > log_y:
        right += width
        k -= 1
    if support_lower is not None and left < support_lower:
        left = support_lower
    while True:
        prop = rng.uniform(left, right)
        fp = f(prop)
        if fp > log_y:
            return prop
        if math.isnan(fp):
            raise KernelError("log density is NaN at a proposal")
        if prop < current:
            left = prop
        else:
            right = prop
        if right - left < MIN_BRACKET:
            raise KernelError("slice interval collapsed without finding a point")


def metropolis_step(current, log_density, ctl, rng, current_logp=None, return_logp=False):
    """Gaussian random-walk Metropolis update.

    Returns ``(value, accepted)``, or ``(value, accepted, logp)`` with
    ``return_logp``. A NaN density at the proposal counts as a rejection.
    """
    lp0 = log_density(current) if current_logp is None else current_logp
    if math.isnan(lp0):
        raise KernelError("log density is NaN at the current point")
    prop = current + ctl.proposal_sd * rng.normal()
    lp = log_density(prop)
    log_u = math.log(rng.uniform_pos())
    accepted = not math.isnan(lp) and log_u < lp - lp0
    if accepted:
        out = (prop, True, lp)
    else:
        out = (current, False, lp0)
    return out if return_logp else out[:2]


def draw_gaussian(mean, covariance, rng):
    """Exact draw from N(mean, covariance) via a Cholesky factor."""
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    cov = np.atleast_2d(np.asarray(covariance, dtype=float))
    if cov.shape != (mean.size, mean.size):
        raise DomainError("covariance shape does not match mean")
    if not np.allclose(cov, cov.T, rtol=1e-10, atol=0):
        raise np.linalg.LinAlgError("covariance is not symmetric")
    chol = np.linalg.cholesky(cov)
    return mean + chol @ rng.standard_normal(mean.size)


def draw_gaussian_precision(precision, linear, rng, scale=1.0, max_cond=1e12):
    """Draw from N(P^-1 b, scale * P^-1) given precision P and vector b.

    The system is factorized after symmetric diagonal scaling, so the
    conditioning check ignores harmless spread in the diagonal; scaled
    matrices whose condition number exceeds ``max_cond`` get a 1e-10 jitter
    and a warning.
    """
    P = np.atleast_2d(np.asarray(precision, dtype=float))
    b = np.atleast_1d(np.asarray(linear, dtype=float))
    if b.size == 0:
        return b.copy()
    d = np.sqrt(np.diag(P))
    if not np.all(d > 0):
        raise np.linalg.LinAlgError("precision matrix has a nonpositive diagonal")
    A = P / np.outer(d, d)
    if A.shape[0] > 1 and np.linalg.cond(A) > max_cond:
        warnings.warn("ill-conditioned precision matrix; adding 1e-10 jitter", RuntimeWarning)
        A = A + 1e-10 * np.eye(A.shape[0])
    chol = np.linalg.cholesky(A)
    w = np.linalg.solve(chol, b / d)
    mean = np.linalg.solve(chol.T, w) / d
    # L^T x = z gives x ~ N(0, A^-1)
    dev = np.linalg.solve(chol.T, rng.standard_normal(b.size)) / d
    return mean + math.sqrt(scale) * dev


def draw_inverse_gamma(shape, rate, rng):
    """X with 1/X ~ Gamma(shape, rate)."""
    if not (shape > 0 and rate > 0):
        raise DomainError(f"inverse gamma needs positive shape and rate, got ({shape}, {rate})")
    return rate / rng.gamma(shape)
