"""Forward simulation from the hierarchical model.

``draw_prior`` samples every parameter from (proper) priors; ``simulate_counts``
adds Gaussian observation noise to the curves; ``make_panel`` builds
epidemic-scale synthetic datasets with chosen population parameters.
"""
import datetime as dt
import math

import numpy as np

from . import kernels
from .data import PanelDataset, standardize
from .errors import ContractError
from .model import ChainState, CovariateTable, ModelData, Priors, Trajectory


def _inv_gamma(rng, shape, rate, size=None):
    return rate / rng.standard_gamma(shape, size)


def _half_cauchy(rng, size):
    return np.abs(rng.standard_normal(size) / rng.standard_normal(size))


def draw_prior(rng, X, priors=Priors.geweke(), covariates=True):
    """One ChainState from the generative model with proper hyperpriors."""
    if not priors.proper:
        raise ContractError("prior draws need proper variance and intercept priors")
    X = np.asarray(X, dtype=float)
    N, p = X.shape
    s = ChainState.empty(N, p)
    a, b = priors.variance_shape, priors.variance_rate
    s.sigma2 = float(_inv_gamma(rng, a, b))
    s.sigma2_reg = _inv_gamma(rng, a, b, 3)
    s.alpha = math.sqrt(priors.intercept_var) * rng.standard_normal(3)
    if covariates and p:
        s.tau = _half_cauchy(rng, 3)
        s.lam = _half_cauchy(rng, (3, p))
        s.beta = (np.sqrt(s.sigma2_reg)[:, None] * s.tau[:, None] * s.lam
                  * rng.standard_normal((3, p)))
    mean = s.alpha[:, None] + s.beta @ X.T
    s.theta = mean + np.sqrt(s.sigma2_reg)[:, None] * rng.standard_normal((3, N))
    s.xi = np.exp(rng.standard_normal(N))
    return s


def curves(state, t):
    t = np.ascontiguousarray(t, dtype=float)
    return np.stack([state.theta[0, i] * kernels.basis_series(t, state.theta[1, i],
                                                              state.theta[2, i], state.xi[i])
                     for i in range(state.N)])


def simulate_counts(state, t, rng):
    f = curves(state, t)
    return f + math.sqrt(state.sigma2) * rng.standard_normal(f.shape)


def orthogonal_design(N, p, rng):
    """Random standardized design (centered, unit-norm columns)."""
    raw = rng.standard_normal((N, p))
    raw -= raw.mean(axis=0)
    return raw / np.linalg.norm(raw, axis=0)


def make_panel(seed, N=10, T=80, p=5, *, alpha=(10000.0, 0.15, 45.0), sd=(1500.0, 0.015, 6.0),
               coefficients=None, noise_sd=None, xi_log_sd=0.5, start=dt.date(2020, 1, 22),
               nonnegative=True):
    """Synthetic panel with known truth.

    ``coefficients`` is a (3, p) array on the standardized-covariate scale
    (default: zero). Returns ``(dataset, truth)`` where ``truth`` is the
    ChainState that generated the counts.
    """
    rng = np.random.default_rng(seed)
    raw = rng.normal(50.0, 10.0, size=(N, p))
    beta = np.zeros((3, p)) if coefficients is None else np.asarray(coefficients, dtype=float)
    if beta.shape != (3, p):
        raise ContractError(f"coefficients must have shape (3, {p})")
    ids = tuple(f"unit{i + 1:02d}" for i in range(N))
    names = tuple(f"cov{j + 1}" for j in range(p))
    table = standardize(CovariateTable(ids, names, raw)) if p else None
    X = table.standardized if p else np.zeros((N, 0))
    truth = ChainState.empty(N, p)
    truth.alpha = np.asarray(alpha, dtype=float)
    truth.beta = beta
    truth.sigma2_reg = np.asarray(sd, dtype=float) ** 2
    truth.theta = (truth.alpha[:, None] + beta @ X.T
                   + np.asarray(sd, dtype=float)[:, None] * rng.standard_normal((3, N)))
    truth.theta[1] = np.abs(truth.theta[1])
    truth.xi = np.exp(xi_log_sd * rng.standard_normal(N))
    t = np.arange(1, T + 1, dtype=float)
    f = curves(truth, t)
    if noise_sd is None:
        noise_sd = 0.01 * float(np.median(truth.theta[0]))
    truth.sigma2 = noise_sd ** 2
    y = f + noise_sd * rng.standard_normal(f.shape)
    if nonnegative:
        y = np.maximum(y, 0.0)
    trajectories = [Trajectory(u, start, y[i]) for i, u in enumerate(ids)]
    return PanelDataset(trajectories, table), truth


def geweke_instance(seed=0, N=3, T=10, p=2):
    """Tiny modelling problem for joint-distribution tests."""
    rng = np.random.default_rng(seed)
    X = orthogonal_design(N, p, rng)
    return ModelData(np.zeros((N, T)), np.arange(1, T + 1, dtype=float), X)
