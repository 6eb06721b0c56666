"""Joint-distribution ("getting it right") check of the Gibbs sampler.

Two simulators of p(parameters, data) are compared: independent draws from
the prior followed by data, and successive-conditional simulation that
alternates a Gibbs sweep with regenerating the data. If every conditional
update is correct, all parameter marginals agree.

Half-Cauchy scales give several scalars infinite variance, so moments are
compared on transformed scalars: log for positive parameters, asinh for the
real-valued ones.

With informative data the successive-conditional chain moves slowly, so the
iterations are split over many short chains. Each starts from an exact joint
draw, which is already stationary, and the chain-mean spread gives the
standard errors.
"""
import copy
import math
from dataclasses import dataclass

import numpy as np

from .gibbs import ProposalScales, SamplerConfig, _scalar_layout, flatten_state, gibbs_sweep
from .model import ModelSpec, Priors
from .samplers import RandomStream
from .synthetic import draw_prior, simulate_counts


def _is_positive(name):
    last = name.rsplit("/", 2)
    return any(part in ("xi", "sigma2", "lambda", "tau") for part in last[-2:]) or name == "sigma2"


def transform(names, values):
    out = np.empty_like(values)
    for k, name in enumerate(names):
        col = values[:, k]
        out[:, k] = np.log(col) if _is_positive(name) else np.arcsinh(col)
    return out


def chain_se(x, chain):
    """Standard error of the pooled mean from independent equal-length chains."""
    means = np.array([x[chain == c].mean(axis=0) for c in np.unique(chain)])
    return means.std(axis=0, ddof=1) / math.sqrt(len(means))


@dataclass
class GewekeResult:
    names: list
    prior_mean: np.ndarray
    chain_mean: np.ndarray
    z_mean: np.ndarray
    prior_var: np.ndarray
    chain_var: np.ndarray
    z_var: np.ndarray

    @property
    def max_abs_z(self):
        return float(max(np.max(np.abs(self.z_mean)), np.max(np.abs(self.z_var))))

    def rows(self):
        for k, n in enumerate(self.names):
            yield n, self.prior_mean[k], self.chain_mean[k], self.z_mean[k], self.z_var[k]


def prior_draws(data, spec, priors, n, rng):
    """``n`` flattened parameter vectors from the prior (marginal-conditional side)."""
    rows = [flatten_state(draw_prior(rng.gen, data.X, priors, spec.uses_covariates), spec)
            for _ in range(n)]
    return np.array(rows)


def _tune(data, spec, config, priors, rng, warmup):
    scales = ProposalScales.initial(data.N, config)
    state = draw_prior(rng.gen, data.X, priors, spec.uses_covariates)
    for it in range(warmup if config.adapt else 0):
        y = simulate_counts(state, data.t, rng.gen)
        state = gibbs_sweep(state, data.with_y(y), spec, config, rng, priors, scales, it)
    return scales


def successive_conditional(data, spec, config, priors, n, rng, warmup=2000, chains=1000):
    """``n`` flattened states from Gibbs sweeps alternated with data draws.

    Proposals are tuned for ``warmup`` iterations on a separate chain and then
    frozen. Returns ``(rows, chain)``, where ``chain`` labels each row.
    """
    if n % chains:
        raise ValueError("iterations must be a multiple of the chain count")
    length = n // chains
    tuned = _tune(data, spec, config, priors, rng, warmup)
    rows = np.empty((n, len(_scalar_layout(data, spec))))
    for c in range(chains):
        scales = copy.deepcopy(tuned)
        state = draw_prior(rng.gen, data.X, priors, spec.uses_covariates)
        for it in range(length):
            y = simulate_counts(state, data.t, rng.gen)
            state = gibbs_sweep(state, data.with_y(y), spec, config, rng, priors, scales)
            rows[c * length + it] = flatten_state(state, spec)
    return rows, np.repeat(np.arange(chains), length)


def geweke_test(data, spec=ModelSpec("M3"), config=None, priors=Priors.geweke(),
                iterations=50000, seed=0, warmup=2000, chains=1000):
    config = config or SamplerConfig(sweeps=2, burn_in=0, thin=1, chains=1, seed=seed,
                                     theta2_proposal_sd=0.5, theta3_proposal_sd=1.0)
    rng_prior, rng_chain = RandomStream(seed).spawn(2)
    names = _scalar_layout(data, spec)
    g_prior = transform(names, prior_draws(data, spec, priors, iterations, rng_prior))
    rows, chain = successive_conditional(data, spec, config, priors, iterations, rng_chain,
                                         warmup, chains)
    g_chain = transform(names, rows)
    pm, cm = g_prior.mean(axis=0), g_chain.mean(axis=0)
    se_p = g_prior.std(axis=0, ddof=1) / math.sqrt(iterations)
    se_c = chain_se(g_chain, chain)
    z_mean = (cm - pm) / np.sqrt(se_p ** 2 + se_c ** 2)
    dp = (g_prior - pm) ** 2
    dc = (g_chain - pm) ** 2
    pv, cv = dp.mean(axis=0), dc.mean(axis=0)
    se_pv = dp.std(axis=0, ddof=1) / math.sqrt(iterations)
    se_cv = chain_se(dc, chain)
    z_var = (cv - pv) / np.sqrt(se_pv ** 2 + se_cv ** 2)
    return GewekeResult(names, pm, cm, z_mean, pv, cv, z_var)
