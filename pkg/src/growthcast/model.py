"""Domain types of the hierarchical Richards model and its log densities."""
import datetime as dt
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .curve import RichardsParams
from .errors import ContractError, DomainError

LOG_2PI = math.log(2.0 * math.pi)
VARIANTS = ("M1", "M2", "M3")
CURVE_PARAMS = ("theta1", "theta2", "theta3")


@dataclass(frozen=True)
class Trajectory:
    """Cumulative counts of one unit on days t = 1..T after ``start_date``."""

    unit_id: str
    start_date: dt.date
    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=float)
        if counts.ndim != 1 or counts.size < 1:
            raise DomainError(f"{self.unit_id}: counts must be a nonempty series")
        if not np.all(np.isfinite(counts)) or np.any(counts < 0):
            raise DomainError(f"{self.unit_id}: counts must be finite and nonnegative")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @property
    def T(self):
        return self.counts.size

    @property
    def days(self):
        return np.arange(1, self.T + 1, dtype=float)

    def date_of(self, day):
        """Calendar date of (possibly fractional) day index ``day``; day 1 is the start."""
        return self.start_date + dt.timedelta(days=int(math.floor(day)) - 1)


@dataclass(frozen=True)
class CovariateTable:
    unit_ids: tuple
    names: tuple
    raw: np.ndarray
    standardized: np.ndarray = None
    center: np.ndarray = None
    scale: np.ndarray = None
    imputed: tuple = ()

    @property
    def p(self):
        return len(self.names)

    def reorder(self, unit_ids):
        idx = [self.unit_ids.index(u) for u in unit_ids]
        pick = lambda a: None if a is None else a[idx]
        return CovariateTable(tuple(unit_ids), self.names, self.raw[idx],
                              pick(self.standardized), self.center, self.scale,
                              self.imputed)


@dataclass(frozen=True)
class ModelSpec:
    """Which of the three model variants to fit; M1 names its single unit."""

    variant: str = "M3"
    unit: str = None

    def __post_init__(self):
        v = self.variant.upper()
        if v not in VARIANTS:
            raise ContractError(f"unknown model variant {self.variant!r}")
        object.__setattr__(self, "variant", v)
        if v == "M1" and self.unit is None:
            raise ContractError("M1 targets exactly one unit; give its id")
        if v != "M1" and self.unit is not None:
            raise ContractError("only M1 takes a unit")

    @property
    def uses_covariates(self):
        return self.variant == "M3"


@dataclass(frozen=True)
class Priors:
    """Hyperpriors for the intercepts and the variances.

    The default (``shape = rate = 0``, infinite intercept variance) is the
    improper pair pi(sigma^2) ~ 1/sigma^2, pi(alpha) ~ 1. Proper values are
    only needed for prior-predictive simulation.
    """

    variance_shape: float = 0.0
    variance_rate: float = 0.0
    intercept_var: float = math.inf

    @property
    def proper(self):
        return self.variance_shape > 0 and self.variance_rate > 0 and math.isfinite(self.intercept_var)

    @classmethod
    def geweke(cls):
        return cls(variance_shape=2.0, variance_rate=2.0, intercept_var=100.0)


@dataclass
class ModelData:
    """Arrays seen by the sampler: counts ``y`` (N, T), days ``t`` (T,) and
    the standardized design ``X`` (N, p)."""

    y: np.ndarray
    t: np.ndarray
    X: np.ndarray
    unit_ids: tuple = ()
    covariate_names: tuple = ()

    def __post_init__(self):
        self.y = np.ascontiguousarray(np.atleast_2d(np.asarray(self.y, dtype=float)))
        self.t = np.ascontiguousarray(np.asarray(self.t, dtype=float))
        N, T = self.y.shape
        if self.X is None:
            self.X = np.zeros((N, 0))
        self.X = np.ascontiguousarray(np.asarray(self.X, dtype=float).reshape(N, -1))
        if self.t.shape != (T,):
            raise ContractError(f"time grid has shape {self.t.shape}, expected ({T},)")
        if not self.unit_ids:
            self.unit_ids = tuple(f"u{i + 1}" for i in range(N))
        if not self.covariate_names:
            self.covariate_names = tuple(f"x{j + 1}" for j in range(self.X.shape[1]))
        if len(self.unit_ids) != N or len(self.covariate_names) != self.X.shape[1]:
            raise ContractError("unit ids / covariate names do not match the arrays")

    @property
    def N(self):
        return self.y.shape[0]

    @property
    def T(self):
        return self.y.shape[1]

    @property
    def p(self):
        return self.X.shape[1]

    def for_spec(self, spec):
        """The data actually modelled under ``spec``."""
        if spec.variant == "M1":
            if spec.unit not in self.unit_ids:
                raise ContractError(f"unit {spec.unit!r} not in data")
            i = self.unit_ids.index(spec.unit)
            return ModelData(self.y[i:i + 1], self.t, np.zeros((1, 0)), (spec.unit,), ())
        if spec.variant == "M2":
            return ModelData(self.y, self.t, np.zeros((self.N, 0)), self.unit_ids, ())
        if self.p == 0:
            raise ContractError("M3 needs covariates")
        return self

    def with_y(self, y):
        return ModelData(y, self.t, self.X, self.unit_ids, self.covariate_names)


@dataclass(frozen=True)
class RegressionBlock:
    alpha: float
    beta: np.ndarray
    lam: np.ndarray
    tau: float
    sigma2: float


@dataclass
class ChainState:
    """Full parameter state of one chain.

    ``theta`` has shape (3, N) with rows (theta1, theta2, theta3); the three
    regression blocks are stored column-wise in ``alpha`` (3,), ``beta`` and
    ``lam`` (3, p), ``tau`` (3,) and ``sigma2_reg`` (3,).
    """

    theta: np.ndarray
    xi: np.ndarray
    sigma2: float
    alpha: np.ndarray
    beta: np.ndarray
    lam: np.ndarray
    tau: np.ndarray
    sigma2_reg: np.ndarray

    @property
    def N(self):
        return self.theta.shape[1]

    @property
    def p(self):
        return self.beta.shape[1]

    def copy(self):
        return ChainState(self.theta.copy(), self.xi.copy(), float(self.sigma2),
                          self.alpha.copy(), self.beta.copy(), self.lam.copy(),
                          self.tau.copy(), self.sigma2_reg.copy())

    def unit_params(self, i):
        return RichardsParams(*self.theta[:, i], self.xi[i])

    def block(self, l):
        """Regression block for curve parameter ``l`` in 1..3."""
        k = l - 1
        return RegressionBlock(float(self.alpha[k]), self.beta[k].copy(), self.lam[k].copy(),
                               float(self.tau[k]), float(self.sigma2_reg[k]))

    def check(self):
        """Raise ContractError unless the state satisfies its invariants."""
        if not self.sigma2 > 0 or not np.all(self.sigma2_reg > 0):
            raise ContractError("variances must be positive")
        if not np.all(self.xi > 0):
            raise ContractError("shape parameters must be positive")
        if self.p and (not np.all(self.lam > 0) or not np.all(self.tau > 0)):
            raise ContractError("horseshoe scales must be positive")
        for name in ("theta", "xi", "alpha", "beta", "lam", "tau", "sigma2_reg"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ContractError(f"non-finite {name}")
        if not math.isfinite(self.sigma2):
            raise ContractError("non-finite sigma2")
        return self

    @classmethod
    def empty(cls, N, p):
        return cls(np.zeros((3, N)), np.ones(N), 1.0, np.zeros(3), np.zeros((3, p)),
                   np.ones((3, p)), np.ones(3), np.ones(3))


def check_dims(state, data):
    if state.N != data.N or state.p != data.p:
        raise ContractError(f"state (N={state.N}, p={state.p}) does not match "
                            f"data (N={data.N}, p={data.p})")


def unit_sse(y, t, theta1, theta2, theta3, xi):
    return kernels.unit_sse(y, t, theta1, theta2, theta3, xi)


def log_likelihood_unit(y, p, sigma2, times=None):
    """Gaussian log likelihood of one trajectory under Richards parameters ``p``.

    ``y`` is a Trajectory or a count array on days 1..T (or on ``times``).
    """
    if not sigma2 > 0:
        raise DomainError(f"sigma2 must be positive, got {sigma2}")
    counts = y.counts if isinstance(y, Trajectory) else np.asarray(y, dtype=float)
    counts = np.ascontiguousarray(counts, dtype=float)
    if times is None:
        times = np.arange(1, counts.size + 1, dtype=float)
    times = np.ascontiguousarray(times, dtype=float)
    sse = kernels.unit_sse(counts, times, *p.as_tuple())
    return -0.5 * counts.size * (LOG_2PI + math.log(sigma2)) - sse / (2.0 * sigma2)


def log_variance_prior(v, priors):
    a, b = priors.variance_shape, priors.variance_rate
    if a == 0 and b == 0:
        return -math.log(v)
    return a * math.log(b) - math.lgamma(a) - (a + 1.0) * math.log(v) - b / v


def log_intercept_prior(alpha, priors):
    if math.isinf(priors.intercept_var):
        return 0.0
    v = priors.intercept_var
    return -0.5 * (LOG_2PI + math.log(v)) - alpha * alpha / (2.0 * v)


def log_half_cauchy_kernel(x):
    return -math.log1p(x * x)


def log_joint_terms(state, data, spec, priors=Priors()):
    """Each factor of the joint density on the log scale, keyed by name.

    ``data`` must already be the data modelled under ``spec``
    (see ``ModelData.for_spec``).
    """
    check_dims(state, data)
    if spec.uses_covariates and data.p == 0:
        raise ContractError("M3 needs covariates")
    if not spec.uses_covariates and data.p != 0:
        raise ContractError(f"{spec.variant} has no covariate terms; got p={data.p}")
    if not state.sigma2 > 0 or not np.all(state.sigma2_reg > 0) or not np.all(state.xi > 0):
        raise DomainError("variances and shapes must be positive")
    N, T, p = data.N, data.T, data.p
    terms = {}
    sse = sum(unit_sse(data.y[i], data.t, *state.theta[:, i], state.xi[i]) for i in range(N))
    terms["likelihood"] = -0.5 * N * T * (LOG_2PI + math.log(state.sigma2)) - sse / (2 * state.sigma2)
    for k, name in enumerate(CURVE_PARAMS):
        s2 = state.sigma2_reg[k]
        resid = state.theta[k] - state.alpha[k] - data.X @ state.beta[k]
        terms[f"{name}/regression"] = -0.5 * N * (LOG_2PI + math.log(s2)) - resid @ resid / (2 * s2)
        terms[f"{name}/alpha"] = log_intercept_prior(state.alpha[k], priors)
        terms[f"{name}/sigma2"] = log_variance_prior(s2, priors)
        if spec.uses_covariates:
            scale2 = s2 * state.tau[k] ** 2 * state.lam[k] ** 2
            b = state.beta[k]
            terms[f"{name}/beta"] = float(np.sum(-0.5 * (LOG_2PI + np.log(scale2)) - b * b / (2 * scale2)))
            terms[f"{name}/lambda"] = float(-np.sum(np.log1p(state.lam[k] ** 2)))
            terms[f"{name}/tau"] = log_half_cauchy_kernel(state.tau[k])
    eta = np.log(state.xi)
    terms["xi"] = float(np.sum(-eta - 0.5 * LOG_2PI - 0.5 * eta * eta))
    terms["sigma2"] = log_variance_prior(state.sigma2, priors)
    return terms


def log_joint(state, data, spec, priors=Priors()):
    """Log of the unnormalized joint posterior density."""
    return math.fsum(log_joint_terms(state, data, spec, priors).values())
