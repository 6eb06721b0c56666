"""Metropolis-within-Gibbs sampler for the hierarchical Richards model.

One sweep updates, in order: final sizes (exact Gaussian), growth rates and
lags (random-walk Metropolis), shapes (elliptical slice on log scale), the
observation variance, intercepts, coefficients, local and global horseshoe
scales (slice sampling on log scale) and the regression variances.

Growth rate, lag and log-shape of a unit are strongly correlated a
posteriori, and all three trade off against the final size. By default each
sweep therefore also makes ``block_moves`` joint moves per unit
(``SamplerConfig.joint_block``): random-walk Metropolis on the triple with the
final size integrated out, followed by an exact draw of the final size (M1
conditions on the final size instead). The
proposal covariance is learned in the second half of burn-in and frozen
afterwards.

Further moves target funnels between levels of the hierarchy:

* shift and scale moves on the growth-rate and lag regressions
  (``group_moves``), which change unit values and their regression jointly;
* with ``collapse_beta`` the global scale tau_l is drawn with beta_l
  integrated out, and sigma2_l likewise followed by a fresh beta_l.

Turning ``joint_block``, ``group_moves`` and ``collapse_beta`` off gives the
plain nine-step sweep.

M2 drops the covariate steps. M1 models a single unit; its curve parameters
get the flat prior that results from integrating out the intercept and
regression variance, which are still drawn each sweep for reporting.
"""
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import kernels
from .diagnostics import bulk_ess, split_rhat
from .errors import ChainError, ContractError, KernelError
from .model import (CURVE_PARAMS, ChainState, ModelData, ModelSpec, Priors, check_dims,
                    log_intercept_prior, log_variance_prior)
from .samplers import (MetropolisControl, RandomStream, adapt_proposal, draw_gaussian_precision,
                       draw_inverse_gamma, ess_step, metropolis_step, slice_step)

RATE_GUARD = 1e-12
MIN_SCALE2 = 1e-300


@dataclass(frozen=True)
class SamplerConfig:
    sweeps: int = 20000
    burn_in: int = 10000
    thin: int = 10
    chains: int = 4
    seed: int = 0
    theta2_proposal_sd: float = 0.02
    theta3_proposal_sd: float = 1.0
    adapt: bool = True
    target_acceptance: float = 0.3
    slice_width: float = 1.0
    joint_block: bool = True
    block_moves: int = 3
    group_moves: bool = True
    collapse_beta: bool = True
    workers: int = None

    def __post_init__(self):
        if self.sweeps < 1 or self.chains < 1 or self.thin < 1:
            raise ContractError("sweeps, chains and thin must be positive")
        if not 0 <= self.burn_in < self.sweeps:
            raise ContractError("burn_in must satisfy 0 <= burn_in < sweeps")
        if self.block_moves < 1:
            raise ContractError("block_moves must be positive")
        if self.theta2_proposal_sd <= 0 or self.theta3_proposal_sd <= 0:
            raise ContractError("proposal sds must be positive")

    @classmethod
    def desk(cls, **kw):
        base = dict(sweeps=2000, burn_in=1000, thin=1, chains=2)
        base.update(kw)
        return cls(**base)

    @property
    def retained_per_chain(self):
        return (self.sweeps - self.burn_in) // self.thin

    def to_dict(self):
        return asdict(self)


BLOCK_TARGET = 0.234
BLOCK_WARMUP = 50


@dataclass
class ProposalScales:
    """Per-unit Metropolis controls and counters.

    ``theta2``/``theta3`` hold coordinatewise controls; the ``block_*`` arrays
    hold running moments of (theta2, theta3, log xi) and a log step scale for
    the joint move. ``group`` holds the controls of the shift and scale moves
    of regressions 2 and 3, in that order.
    """

    theta2: list
    theta3: list
    accepted: np.ndarray = None
    proposed: int = 0
    block_mean: np.ndarray = None
    block_cov: np.ndarray = None
    block_n: np.ndarray = None
    block_log_scale: np.ndarray = None
    block_chol: list = None
    group: list = None
    group_accepted: np.ndarray = None

    @classmethod
    def initial(cls, N, config):
        mk = lambda sd: MetropolisControl(sd, config.adapt, config.target_acceptance)
        base = np.diag([config.theta2_proposal_sd, config.theta3_proposal_sd, 0.1]) ** 2
        return cls([mk(config.theta2_proposal_sd) for _ in range(N)],
                   [mk(config.theta3_proposal_sd) for _ in range(N)],
                   np.zeros((3, N)), 0,
                   np.zeros((N, 3)), np.tile(base, (N, 1, 1)), np.zeros(N),
                   np.full(N, math.log(2.38 / math.sqrt(3))),
                   [np.sqrt(base) for _ in range(N)],
                   [mk(0.5 * config.theta2_proposal_sd), mk(0.3),
                    mk(0.5 * config.theta3_proposal_sd), mk(0.3)],
                   np.zeros(4))

    def restart_block_moments(self):
        """Forget the block moments (e.g. the transient); the current Cholesky
        factor stays in use until enough new states have been seen."""
        self.block_mean[:] = 0.0
        self.block_cov[:] = 0.0
        self.block_n[:] = 0

    def reset_counts(self):
        self.accepted[:] = 0
        self.group_accepted[:] = 0
        self.proposed = 0

    def learn_block(self, i, x, accepted, iteration):
        """Welford update of the moments of unit i and Robbins-Monro scaling."""
        self.block_n[i] += 1
        n = self.block_n[i]
        delta = x - self.block_mean[i]
        self.block_mean[i] += delta / n
        if n > 1:
            self.block_cov[i] += (np.outer(delta, x - self.block_mean[i]) - self.block_cov[i]) / n
        gain = (iteration + 1.0) ** -0.6
        self.block_log_scale[i] += gain * (float(accepted) - BLOCK_TARGET)
        if n >= BLOCK_WARMUP:
            cov = self.block_cov[i] + 1e-12 * np.diag(np.diag(self.block_cov[i]) + 1e-12)
            try:
                self.block_chol[i] = np.linalg.cholesky(cov)
            except np.linalg.LinAlgError:
                pass


# ---------------------------------------------------------------------------
# full conditionals


def _prior_means(state, data, l):
    k = l - 1
    return state.alpha[k] + data.X @ state.beta[k]


def theta1_conditional(state, data, spec):
    """Mean and variance vectors of the (diagonal) Gaussian full conditional."""
    s2 = state.sigma2
    hh = np.empty(data.N)
    yh = np.empty(data.N)
    for i in range(data.N):
        hh[i], yh[i] = kernels.basis_stats(data.y[i], data.t, state.theta[1, i],
                                           state.theta[2, i], state.xi[i])
    if spec.variant == "M1":
        prec = hh / s2
        lin = yh / s2
    else:
        s2l = state.sigma2_reg[0]
        prec = hh / s2 + 1.0 / s2l
        lin = yh / s2 + _prior_means(state, data, 1) / s2l
    if np.any(prec <= 0):
        raise ContractError("degenerate theta1 conditional (zero basis and flat prior)")
    return lin / prec, 1.0 / prec


def theta_log_target(state, data, spec, l, i, value):
    """Log full conditional (unnormalized) of theta_l for unit i, l in {2, 3}."""
    th = [state.theta[0, i], state.theta[1, i], state.theta[2, i]]
    th[l - 1] = value
    sse = kernels.unit_sse(data.y[i], data.t, th[0], th[1], th[2], state.xi[i])
    out = -sse / (2.0 * state.sigma2)
    if spec.variant != "M1":
        m = state.alpha[l - 1] + data.X[i] @ state.beta[l - 1]
        out -= (value - m) ** 2 / (2.0 * state.sigma2_reg[l - 1])
    return out


def xi_log_likelihood(state, data, i, eta):
    """Likelihood part of the log-shape conditional; the N(0,1) prior is the ellipse."""
    sse = kernels.unit_sse(data.y[i], data.t, state.theta[0, i], state.theta[1, i],
                           state.theta[2, i], math.exp(eta))
    return -sse / (2.0 * state.sigma2)


def curve_block_log_target(state, data, spec, i, theta2, theta3, eta):
    """Log conditional of (theta2, theta3, log xi) for unit i given theta1."""
    sse = kernels.unit_sse(data.y[i], data.t, state.theta[0, i], theta2, theta3, math.exp(eta))
    out = -sse / (2.0 * state.sigma2) - 0.5 * eta * eta
    if spec.variant != "M1":
        xb = data.X[i]
        m2 = state.alpha[1] + xb @ state.beta[1]
        m3 = state.alpha[2] + xb @ state.beta[2]
        out -= (theta2 - m2) ** 2 / (2.0 * state.sigma2_reg[1])
        out -= (theta3 - m3) ** 2 / (2.0 * state.sigma2_reg[2])
    return out


def _theta1_prior(state, data, spec, i):
    """Prior mean and precision of theta1 for unit i (zero precision when flat)."""
    if spec.variant == "M1":
        return 0.0, 0.0
    return state.alpha[0] + data.X[i] @ state.beta[0], 1.0 / state.sigma2_reg[0]


def _theta1_marginal(state, data, spec, i, theta2, theta3, xi):
    """Shape-dependent part of log p(y_i | shape) with theta1 integrated out."""
    hh, yh = kernels.basis_stats(data.y[i], data.t, theta2, theta3, xi)
    m, q = _theta1_prior(state, data, spec, i)
    prec = hh / state.sigma2 + q
    if not prec > 0:
        return -math.inf
    lin = yh / state.sigma2 + m * q
    return 0.5 * lin * lin / prec - 0.5 * math.log(prec)


def group_log_target(state, data, spec, l, theta_l, alpha_l, sigma2_l, priors=Priors()):
    """Log density of regression ``l`` (2 or 3) and its unit values, theta1 integrated out.

    Only the factors that the shift and scale moves change are kept: the unit
    likelihoods, the regression density of theta_l, and the priors of
    alpha_l, sigma2_l and beta_l.
    """
    k = l - 1
    theta = state.theta.copy()
    theta[k] = theta_l
    out = 0.0
    for i in range(data.N):
        out += _theta1_marginal(state, data, spec, i, theta[1, i], theta[2, i], state.xi[i])
    if not math.isfinite(out):
        return -math.inf
    resid = theta_l - alpha_l - data.X @ state.beta[k]
    out += -0.5 * data.N * math.log(sigma2_l) - resid @ resid / (2.0 * sigma2_l)
    out += log_intercept_prior(alpha_l, priors) + log_variance_prior(sigma2_l, priors)
    if spec.uses_covariates:
        scale2 = sigma2_l * state.tau[k] ** 2 * state.lam[k] ** 2
        out += float(np.sum(-0.5 * np.log(scale2) - state.beta[k] ** 2 / (2.0 * scale2)))
    return out


def collapsed_block_log_target(state, data, spec, i, theta2, theta3, eta):
    """Log density of (theta2, theta3, log xi) for unit i with theta1 integrated out.

    theta1 enters linearly, so y_i given the shape is Gaussian once theta1 is
    marginalized over its Gaussian prior (or a flat one for M1).
    """
    hh, yh = kernels.basis_stats(data.y[i], data.t, theta2, theta3, math.exp(eta))
    m, q = _theta1_prior(state, data, spec, i)
    prec = hh / state.sigma2 + q
    if not prec > 0:
        return -math.inf
    lin = yh / state.sigma2 + m * q
    out = 0.5 * lin * lin / prec - 0.5 * math.log(prec) - 0.5 * eta * eta
    if spec.variant != "M1":
        xb = data.X[i]
        m2 = state.alpha[1] + xb @ state.beta[1]
        m3 = state.alpha[2] + xb @ state.beta[2]
        out -= (theta2 - m2) ** 2 / (2.0 * state.sigma2_reg[1])
        out -= (theta3 - m3) ** 2 / (2.0 * state.sigma2_reg[2])
    return out


def total_sse(state, data):
    return sum(kernels.unit_sse(data.y[i], data.t, *state.theta[:, i], state.xi[i])
               for i in range(data.N))


def sigma2_conditional(state, data, priors=Priors(), sse=None):
    if sse is None:
        sse = total_sse(state, data)
    shape = priors.variance_shape + 0.5 * data.N * data.T
    rate = priors.variance_rate + 0.5 * sse + RATE_GUARD
    return shape, rate


def alpha_conditional(state, data, l, priors=Priors()):
    k = l - 1
    s2l = state.sigma2_reg[k]
    resid = state.theta[k] - data.X @ state.beta[k]
    prec = data.N / s2l + (0.0 if math.isinf(priors.intercept_var) else 1.0 / priors.intercept_var)
    return resid.sum() / s2l / prec, 1.0 / prec


def _shrink_precision(state, k):
    scale2 = np.maximum(state.tau[k] ** 2 * state.lam[k] ** 2, MIN_SCALE2)
    return 1.0 / scale2


def beta_conditional(state, data, l):
    """Precision ``X'X + Lambda*^-1``, linear term and variance multiplier."""
    k = l - 1
    P = data.X.T @ data.X + np.diag(_shrink_precision(state, k))
    b = data.X.T @ (state.theta[k] - state.alpha[k])
    return P, b, state.sigma2_reg[k]


def lambda_log_target(state, l, j, lam):
    """Log conditional of a local scale on lam > 0 (half-Cauchy kernel)."""
    k = l - 1
    if lam <= 0:
        return -math.inf
    beta = state.beta[k, j]
    c2 = state.sigma2_reg[k] * state.tau[k] ** 2
    quad = 0.0 if beta == 0.0 else beta * beta / (2.0 * c2 * lam * lam)
    return -math.log(lam) - quad - math.log1p(lam * lam)


def tau_collapsed_log_target(state, data, l, tau):
    """Log conditional of the global scale tau_l with beta_l integrated out.

    theta_l - alpha_l is N(0, sigma2_l (I + X D X')) with D = tau^2 diag(lam^2).
    """
    k = l - 1
    if tau <= 0:
        return -math.inf
    D = tau * tau * state.lam[k] ** 2
    C = np.eye(data.N) + (data.X * D) @ data.X.T
    try:
        L = np.linalg.cholesky(C)
    except np.linalg.LinAlgError:
        return -math.inf
    w = np.linalg.solve(L, state.theta[k] - state.alpha[k])
    return (-float(np.sum(np.log(np.diag(L)))) - float(w @ w) / (2.0 * state.sigma2_reg[k])
            - math.log1p(tau * tau))


def tau_log_target(state, l, tau):
    """Log conditional of tau_l given beta_l (half-Cauchy kernel)."""
    k = l - 1
    if tau <= 0:
        return -math.inf
    q = float(np.sum(state.beta[k] ** 2 / state.lam[k] ** 2))
    quad = 0.0 if q == 0.0 else q / (2.0 * state.sigma2_reg[k] * tau * tau)
    return -state.p * math.log(tau) - quad - math.log1p(tau * tau)


def sigma2_reg_conditional(state, data, spec, l, priors=Priors()):
    """Inverse-gamma law of sigma2_l given beta_l and the rest."""
    k = l - 1
    resid = state.theta[k] - state.alpha[k] - data.X @ state.beta[k]
    rate2 = resid @ resid
    p = data.p if spec.uses_covariates else 0
    if p:
        rate2 += float(np.sum(state.beta[k] ** 2 * _shrink_precision(state, k)))
    shape = priors.variance_shape + 0.5 * (data.N + p)
    rate = priors.variance_rate + 0.5 * rate2 + RATE_GUARD
    return shape, rate


def sigma2_reg_collapsed_conditional(state, data, spec, l, priors=Priors()):
    """Inverse-gamma law of sigma2_l given everything except beta_l.

    With beta_l ~ N(0, sigma2_l D) integrated out, theta_l - alpha_l is
    N(0, sigma2_l (I + X D X')). By Woodbury the quadratic form is
    r'r - b'P^-1 b with P and b those of the beta_l conditional.
    """
    k = l - 1
    resid = state.theta[k] - state.alpha[k]
    rate2 = float(resid @ resid)
    if spec.uses_covariates and data.p:
        P, b, _ = beta_conditional(state, data, l)
        d = np.sqrt(np.diag(P))
        w = np.linalg.solve(np.linalg.cholesky(P / np.outer(d, d)), b / d)
        rate2 = max(rate2 - float(w @ w), 0.0)
    shape = priors.variance_shape + 0.5 * data.N
    rate = priors.variance_rate + 0.5 * rate2 + RATE_GUARD
    return shape, rate


# ---------------------------------------------------------------------------
# individual steps; each returns new values and leaves ``state`` untouched


def sample_theta1(state, data, spec, rng):
    mean, var = theta1_conditional(state, data, spec)
    return mean + np.sqrt(var) * rng.standard_normal(data.N)


def sample_theta23(state, data, spec, scales, rng, adapt_iteration=None):
    """Coordinatewise Metropolis for (theta2, theta3) of every unit.

    Returns updated (theta2, theta3) and a (2, N) boolean acceptance array.
    When ``adapt_iteration`` is given the proposal scales are tuned in place.
    """
    work = state.copy()
    flags = np.zeros((2, data.N), dtype=bool)
    for i in range(data.N):
        for l in (2, 3):
            ctls = scales.theta2 if l == 2 else scales.theta3
            target = lambda v, l=l, i=i: theta_log_target(work, data, spec, l, i, v)
            new, ok = metropolis_step(work.theta[l - 1, i], target, ctls[i], rng)
            work.theta[l - 1, i] = new
            flags[l - 2, i] = ok
            if adapt_iteration is not None and ctls[i].adapt:
                ctls[i] = adapt_proposal(ctls[i], ok, adapt_iteration)
    return work.theta[1].copy(), work.theta[2].copy(), flags


def sample_xi(state, data, rng):
    out = np.empty(data.N)
    for i in range(data.N):
        eta = ess_step(math.log(state.xi[i]), lambda e, i=i: xi_log_likelihood(state, data, i, e), rng)
        out[i] = math.exp(eta)
    return out


def sample_curve_block(state, data, spec, scales, rng, adapt_iteration=None, moves=1):
    """Joint moves on the curve parameters of each unit.

    Each of ``moves`` random-walk Metropolis steps on (theta2, theta3, log xi)
    targets their density with theta1 integrated out; theta1 is then drawn
    from its exact Gaussian conditional. M1 conditions on theta1 instead:
    under its flat prior, integrating theta1 out leaves a density that grows
    without bound when the data end before the inflection.
    Returns updated theta (3, N), xi and the per-unit acceptance fraction.
    """
    collapsed = spec.variant != "M1"
    target = collapsed_block_log_target if collapsed else curve_block_log_target
    theta = state.theta.copy()
    xi = state.xi.copy()
    rate = np.zeros(data.N)
    for i in range(data.N):
        cur = np.array([theta[1, i], theta[2, i], math.log(xi[i])])
        lp0 = target(state, data, spec, i, *cur)
        for _ in range(moves):
            step = math.exp(scales.block_log_scale[i]) * (scales.block_chol[i] @ rng.standard_normal(3))
            prop = cur + step
            lp = target(state, data, spec, i, *prop)
            ok = not math.isnan(lp) and math.log(rng.uniform_pos()) < lp - lp0
            if ok:
                cur, lp0 = prop, lp
            rate[i] += ok / moves
            if adapt_iteration is not None:
                scales.learn_block(i, cur, ok, adapt_iteration)
        theta[1, i], theta[2, i], xi[i] = cur[0], cur[1], math.exp(cur[2])
        if not collapsed:
            continue
        hh, yh = kernels.basis_stats(data.y[i], data.t, theta[1, i], theta[2, i], xi[i])
        m, q = _theta1_prior(state, data, spec, i)
        prec = hh / state.sigma2 + q
        if not prec > 0:
            raise ContractError("degenerate theta1 conditional (zero basis and flat prior)")
        theta[0, i] = (yh / state.sigma2 + m * q) / prec + rng.normal() / math.sqrt(prec)
    return theta, xi, rate


def sample_group_moves(state, data, spec, scales, rng, priors=Priors(), adapt_iteration=None):
    """Shift and scale moves on regressions 2 and 3, then an exact theta1 draw.

    The shift adds one offset to alpha_l and every theta_l; the scale
    multiplies the residuals theta_l - alpha_l - X beta_l by c and sigma2_l by
    c^2 (Jacobian c^(N+2)). Both leave the regression fit unchanged and so
    cross the funnel between the unit values and a small sigma2_l. Returns the
    updated state.
    """
    s = state.copy()
    for l in (2, 3):
        k = l - 1
        pos = 2 * (l - 2)
        lp0 = group_log_target(s, data, spec, l, s.theta[k], s.alpha[k], s.sigma2_reg[k], priors)
        ctl = scales.group[pos]
        delta = ctl.proposal_sd * rng.normal()
        lp = group_log_target(s, data, spec, l, s.theta[k] + delta, s.alpha[k] + delta,
                              s.sigma2_reg[k], priors)
        ok = not math.isnan(lp) and math.log(rng.uniform_pos()) < lp - lp0
        if ok:
            s.theta[k] = s.theta[k] + delta
            s.alpha[k] += delta
            lp0 = lp
        scales.group_accepted[pos] += ok
        if adapt_iteration is not None and ctl.adapt:
            scales.group[pos] = adapt_proposal(ctl, ok, adapt_iteration)

        ctl = scales.group[pos + 1]
        u = ctl.proposal_sd * rng.normal()
        c = math.exp(u)
        fit = s.alpha[k] + data.X @ s.beta[k]
        theta_new = fit + c * (s.theta[k] - fit)
        s2_new = c * c * s.sigma2_reg[k]
        lp = group_log_target(s, data, spec, l, theta_new, s.alpha[k], s2_new, priors)
        ok = (not math.isnan(lp) and s2_new > 0
              and math.log(rng.uniform_pos()) < lp - lp0 + (data.N + 2) * u)
        if ok:
            s.theta[k] = theta_new
            s.sigma2_reg[k] = s2_new
        scales.group_accepted[pos + 1] += ok
        if adapt_iteration is not None and ctl.adapt:
            scales.group[pos + 1] = adapt_proposal(ctl, ok, adapt_iteration)
    s.theta[0] = sample_theta1(s, data, spec, rng)
    return s


def sample_sigma2_obs(state, data, rng, priors=Priors()):
    return draw_inverse_gamma(*sigma2_conditional(state, data, priors), rng)


def sample_alpha(state, data, rng, priors=Priors()):
    out = np.empty(3)
    for l in (1, 2, 3):
        m, v = alpha_conditional(state, data, l, priors)
        out[l - 1] = m + math.sqrt(v) * rng.normal()
    return out


def sample_beta(state, data, rng):
    out = np.empty_like(state.beta)
    for l in (1, 2, 3):
        P, b, scale = beta_conditional(state, data, l)
        out[l - 1] = draw_gaussian_precision(P, b, rng, scale=scale)
    return out


def sample_lambda(state, rng, width=1.0):
    """Slice updates of every local scale, on log scale with Jacobian."""
    work = state.copy()
    for k in range(3):
        for j in range(state.p):
            f = lambda u, k=k, j=j: lambda_log_target(work, k + 1, j, math.exp(u)) + u
            u = slice_step(math.log(work.lam[k, j]), f, width, rng=rng)
            work.lam[k, j] = math.exp(u)
    return work.lam


def sample_tau(state, data, rng, width=1.0, collapsed=True):
    """Slice updates of the global scales on log scale.

    With ``collapsed`` each tau_l is drawn with beta_l integrated out.
    """
    work = state.copy()
    for k in range(3):
        if collapsed:
            f = lambda u, k=k: tau_collapsed_log_target(work, data, k + 1, math.exp(u)) + u
        else:
            f = lambda u, k=k: tau_log_target(work, k + 1, math.exp(u)) + u
        u = slice_step(math.log(work.tau[k]), f, width, rng=rng)
        work.tau[k] = math.exp(u)
    return work.tau


def sample_sigma2_regression(state, data, spec, rng, priors=Priors(), collapsed=True):
    """Draw the regression variances; returns (sigma2_reg, beta).

    With ``collapsed`` (and covariates) each sigma2_l is drawn with beta_l
    integrated out and beta_l is then redrawn given it; otherwise sigma2_l is
    drawn given beta_l, which is returned unchanged.
    """
    work = state.copy()
    collapsed = collapsed and spec.uses_covariates and data.p > 0
    for l in (1, 2, 3):
        k = l - 1
        if collapsed:
            work.sigma2_reg[k] = draw_inverse_gamma(
                *sigma2_reg_collapsed_conditional(work, data, spec, l, priors), rng)
            P, b, scale = beta_conditional(work, data, l)
            work.beta[k] = draw_gaussian_precision(P, b, rng, scale=scale)
        else:
            work.sigma2_reg[k] = draw_inverse_gamma(*sigma2_reg_conditional(work, data, spec, l, priors),
                                                    rng)
    return work.sigma2_reg, work.beta


# ---------------------------------------------------------------------------
# sweep and chains


def gibbs_sweep(state, data, spec, config, rng, priors=Priors(), scales=None, adapt_iteration=None):
    """Apply all conditional updates once; returns a new ChainState.

    ``data`` is the data modelled under ``spec`` (``ModelData.for_spec``).
    ``scales`` carries per-unit Metropolis controls and acceptance counters.
    """
    check_dims(state, data)
    if scales is None:
        scales = ProposalScales.initial(data.N, config)
    s = state.copy()
    step = 0
    try:
        step = 1
        s.theta[0] = sample_theta1(s, data, spec, rng)
        step = 2
        s.theta[1], s.theta[2], flags = sample_theta23(s, data, spec, scales, rng, adapt_iteration)
        scales.accepted[:2] += flags
        scales.proposed += 1
        step = 3
        s.xi = sample_xi(s, data, rng)
        if config.joint_block:
            s.theta, s.xi, bflags = sample_curve_block(s, data, spec, scales, rng, adapt_iteration,
                                                       config.block_moves)
            scales.accepted[2] += bflags
        if config.group_moves and spec.variant != "M1":
            s = sample_group_moves(s, data, spec, scales, rng, priors, adapt_iteration)
        step = 4
        s.sigma2 = sample_sigma2_obs(s, data, rng, priors)
        step = 5
        s.alpha = sample_alpha(s, data, rng, priors)
        if spec.uses_covariates:
            step = 6
            s.beta = sample_beta(s, data, rng)
            step = 7
            s.lam = sample_lambda(s, rng, config.slice_width)
            step = 8
            s.tau = sample_tau(s, data, rng, config.slice_width, config.collapse_beta)
        step = 9
        s.sigma2_reg, s.beta = sample_sigma2_regression(s, data, spec, rng, priors,
                                                       config.collapse_beta)
    except (KernelError, ContractError, ValueError, np.linalg.LinAlgError, OverflowError) as exc:
        raise ChainError(f"step {step} failed: {exc}", step=step) from exc
    return s


def initial_state(data, spec, rng, jitter=True):
    """Data-informed starting point, optionally jittered per chain."""
    N, p = data.N, data.p
    s = ChainState.empty(N, p)
    for i in range(N):
        y = data.y[i]
        scale = rng.uniform(0.9, 1.1) if jitter else 1.0
        s.theta[0, i] = 1.2 * float(y.max()) * scale
        s.theta[1, i] = 0.1
        inc = np.diff(y)
        day = float(data.t[int(np.argmax(inc)) + 1]) if inc.size else float(data.t[0])
        s.theta[2, i] = day + (rng.uniform(-3.0, 3.0) if jitter else 0.0)
    s.alpha = s.theta.mean(axis=1)
    for k in range(3):
        spread = float(np.var(s.theta[k])) if N > 1 else 0.0
        s.sigma2_reg[k] = max(spread, (0.5 * s.alpha[k]) ** 2, 1e-8)
    s.sigma2 = max(total_sse(s, data) / (N * data.T), 1e-8)
    return s


def _scalar_layout(data, spec):
    """Stable scalar names: 'unit/param' and 'thetaL/param[/index]'."""
    names = []
    for u in data.unit_ids:
        names += [f"{u}/theta1", f"{u}/theta2", f"{u}/theta3", f"{u}/xi"]
    names.append("sigma2")
    for l in (1, 2, 3):
        names.append(f"theta{l}/alpha")
        if spec.uses_covariates:
            names += [f"theta{l}/beta/{j + 1}" for j in range(data.p)]
            names += [f"theta{l}/lambda/{j + 1}" for j in range(data.p)]
            names.append(f"theta{l}/tau")
        names.append(f"theta{l}/sigma2")
    return names


def flatten_state(state, spec):
    parts = [np.column_stack([state.theta.T, state.xi]).ravel(), [state.sigma2]]
    for k in range(3):
        parts.append([state.alpha[k]])
        if spec.uses_covariates:
            parts += [state.beta[k], state.lam[k], [state.tau[k]]]
        parts.append([state.sigma2_reg[k]])
    return np.concatenate([np.asarray(x, dtype=float) for x in parts])


def unflatten_state(vec, N, p, spec):
    vec = np.asarray(vec, dtype=float)
    s = ChainState.empty(N, p)
    unit = vec[:4 * N].reshape(N, 4)
    s.theta = np.ascontiguousarray(unit[:, :3].T)
    s.xi = unit[:, 3].copy()
    pos = 4 * N
    s.sigma2 = float(vec[pos])
    pos += 1
    for k in range(3):
        s.alpha[k] = vec[pos]
        pos += 1
        if spec.uses_covariates:
            s.beta[k] = vec[pos:pos + p]
            s.lam[k] = vec[pos + p:pos + 2 * p]
            s.tau[k] = vec[pos + 2 * p]
            pos += 2 * p + 1
        s.sigma2_reg[k] = vec[pos]
        pos += 1
    return s


@dataclass
class PosteriorDraws:
    """Retained post-burn-in states of all chains.

    ``values`` is an (S, K) matrix of scalars named by ``names``; row ``s``
    belongs to chain ``chain[s]``. Use :meth:`state` for ChainState views.
    """

    spec: ModelSpec
    config: SamplerConfig
    names: list
    values: np.ndarray
    chain: np.ndarray
    unit_ids: tuple
    covariate_names: tuple
    t: np.ndarray
    acceptance_rates: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)

    @property
    def N(self):
        return len(self.unit_ids)

    @property
    def p(self):
        return len(self.covariate_names) if self.spec.uses_covariates else 0

    def __len__(self):
        return self.values.shape[0]

    def state(self, s):
        return unflatten_state(self.values[s], self.N, self.p, self.spec)

    def states(self):
        return [self.state(s) for s in range(len(self))]

    def column(self, name):
        return self.values[:, self.names.index(name)]

    def unit_index(self, unit):
        if unit in self.unit_ids:
            return self.unit_ids.index(unit)
        if isinstance(unit, (int, np.integer)) and 0 <= unit < self.N:
            return int(unit)
        raise ContractError(f"unit {unit!r} not in draws")

    def unit_params(self, unit):
        """(S, 4) array of (theta1, theta2, theta3, xi) draws for one unit."""
        i = self.unit_index(unit)
        return self.values[:, 4 * i:4 * i + 4]

    def coefficient_draws(self, l):
        """(S, p) draws of the coefficients of regression ``l``."""
        if not self.spec.uses_covariates:
            raise ContractError(f"{self.spec.variant} has no coefficients")
        cols = [self.names.index(f"theta{l}/beta/{j + 1}") for j in range(self.p)]
        return self.values[:, cols]

    def by_chain(self, name):
        """(chains, draws) array of one scalar."""
        col = self.column(name)
        ids = np.unique(self.chain)
        return np.stack([col[self.chain == c] for c in ids])

    def compute_diagnostics(self):
        out = {}
        if len(self) == 0:
            return out
        for name in self.names:
            x = self.by_chain(name)
            out[name] = (split_rhat(x), bulk_ess(x))
        self.diagnostics = out
        return out


def _run_one_chain(data, spec, config, priors, rng, chain_id, init=None):
    state = initial_state(data, spec, rng) if init is None else init.copy()
    scales = ProposalScales.initial(data.N, config)
    rows = []
    for sweep in range(config.sweeps):
        burning = sweep < config.burn_in
        adapt_it = sweep if (burning and config.adapt) else None
        if sweep == config.burn_in:
            scales.reset_counts()
        elif config.adapt and sweep == config.burn_in // 2 >= BLOCK_WARMUP:
            scales.restart_block_moments()
        try:
            state = gibbs_sweep(state, data, spec, config, rng, priors, scales, adapt_it)
        except ChainError as exc:
            exc.sweep = sweep
            raise ChainError(f"chain {chain_id}, sweep {sweep}: {exc}", exc.step, sweep) from exc
        vec = flatten_state(state, spec)
        if not np.all(np.isfinite(vec)):
            raise ChainError(f"chain {chain_id}: non-finite state at sweep {sweep}", None, sweep)
        if not burning and (sweep - config.burn_in + 1) % config.thin == 0:
            rows.append(vec)
    rates = scales.accepted / max(scales.proposed, 1)
    group_rates = scales.group_accepted / max(scales.proposed, 1)
    return np.array(rows).reshape(len(rows), -1), rates, group_rates


def _chain_job(args):
    return _run_one_chain(*args)


def worker_count(requested=None):
    if requested:
        return max(1, int(requested))
    env = os.environ.get("GROWTHCAST_THREADS")
    if env:
        return max(1, int(env))
    return 1


def run_chains(data, spec, config, priors=Priors(), inits=None):
    """Run ``config.chains`` independent chains and collect retained draws."""
    if not isinstance(data, ModelData):
        data = data.model_data()
    model_data = data.for_spec(spec)
    streams = RandomStream(config.seed).spawn(config.chains)
    inits = inits or [None] * config.chains
    jobs = [(model_data, spec, config, priors, streams[c], c, inits[c]) for c in range(config.chains)]
    workers = min(worker_count(config.workers), config.chains)
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_chain_job, jobs))
    else:
        results = [_chain_job(j) for j in jobs]
    values = np.vstack([r[0] for r in results])
    chain = np.concatenate([np.full(r[0].shape[0], c) for c, r in enumerate(results)])
    rates = np.mean([r[1] for r in results], axis=0)
    acc = {}
    for i, u in enumerate(model_data.unit_ids):
        acc[f"{u}/theta2"] = float(rates[0, i])
        acc[f"{u}/theta3"] = float(rates[1, i])
        if config.joint_block:
            acc[f"{u}/block"] = float(rates[2, i])
    if config.group_moves and spec.variant != "M1":
        group_rates = np.mean([r[2] for r in results], axis=0)
        for pos, name in enumerate(("theta2/shift", "theta2/scale", "theta3/shift", "theta3/scale")):
            acc[name] = float(group_rates[pos])
    draws = PosteriorDraws(spec, config, _scalar_layout(model_data, spec), values, chain,
                           model_data.unit_ids, model_data.covariate_names, model_data.t.copy(),
                           acceptance_rates=acc)
    draws.compute_diagnostics()
    return draws
