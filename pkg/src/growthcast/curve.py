"""Richards growth curve, its Gompertz/logistic limits and the flat time point.

All functions accept scalars or numpy arrays for ``t``.
"""
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DomainError


@dataclass(frozen=True)
class RichardsParams:
    """Final size ``theta1``, growth rate ``theta2`` (1/day), lag ``theta3``
    (day) and shape ``xi``. Only ``xi > 0`` is enforced here."""

    theta1: float
    theta2: float
    theta3: float
    xi: float

    def __post_init__(self):
        vals = (self.theta1, self.theta2, self.theta3, self.xi)
        if not all(math.isfinite(v) for v in vals):
            raise DomainError(f"non-finite Richards parameters {vals}")
        if not self.xi > 0:
            raise DomainError(f"shape xi must be positive, got {self.xi}")

    def as_tuple(self):
        return (self.theta1, self.theta2, self.theta3, self.xi)


@dataclass(frozen=True)
class FlatTimeQuery:
    gamma: float

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise DomainError(f"gamma must lie in (0, 1), got {self.gamma}")


def _check_t(t):
    arr = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("time argument must be finite")
    return arr


def basis(t, theta2, theta3, xi):
    """The shape factor ``[1 + xi*exp(-theta2*(t - theta3))]^(-1/xi)``."""
    if not (math.isfinite(theta2) and math.isfinite(theta3) and math.isfinite(xi)):
        raise DomainError("non-finite basis parameters")
    if not xi > 0:
        raise DomainError(f"shape xi must be positive, got {xi}")
    arr = _check_t(t)
    out = kernels.basis_series(np.atleast_1d(arr), theta2, theta3, xi)
    return float(out[0]) if arr.ndim == 0 else out.reshape(arr.shape)


def richards(t, p):
    return p.theta1 * basis(t, p.theta2, p.theta3, p.xi)


def richards_series(times, p):
    times = np.asarray(times, dtype=float)
    if times.size == 0:
        raise DomainError("times must be nonempty")
    return richards(times, p)


def logistic(t, theta1, theta2, theta3):
    arr = _check_t(t)
    return theta1 / (1.0 + np.exp(-theta2 * (arr - theta3)))


def gompertz(t, theta1, theta2, theta3):
    """``theta1 * exp(-exp(-theta2 * (t - theta3)))``; the xi -> 0 limit."""
    if not all(math.isfinite(v) for v in (theta1, theta2, theta3)):
        raise DomainError("non-finite Gompertz parameters")
    arr = _check_t(t)
    with np.errstate(over="ignore"):
        out = theta1 * np.exp(-np.exp(-theta2 * (arr - theta3)))
    return float(out) if arr.ndim == 0 else out


def flat_time_point(p, q):
    """Day at which the curve reaches ``q.gamma * theta1``.

    ``q`` may be a FlatTimeQuery or a bare float gamma.
    """
    gamma = q.gamma if isinstance(q, FlatTimeQuery) else FlatTimeQuery(float(q)).gamma
    if p.theta2 == 0:
        raise DomainError("theta2 must be nonzero for a flat time point")
    # (1/gamma)^xi - 1 via expm1 keeps digits for small xi
    excess = math.expm1(-p.xi * math.log(gamma))
    return p.theta3 - math.log(excess / p.xi) / p.theta2


def flat_time_points(theta2, theta3, xi, gamma):
    """Vectorized flat time point over arrays of parameters."""
    if not 0.0 < gamma < 1.0:
        raise DomainError(f"gamma must lie in (0, 1), got {gamma}")
    theta2 = np.asarray(theta2, dtype=float)
    if np.any(theta2 == 0):
        raise DomainError("theta2 must be nonzero for a flat time point")
    xi = np.asarray(xi, dtype=float)
    excess = np.expm1(-xi * math.log(gamma))
    return np.asarray(theta3, dtype=float) - np.log(excess / xi) / theta2
