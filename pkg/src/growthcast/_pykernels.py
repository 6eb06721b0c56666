"""Pure numpy implementations of the hot curve kernels.

These mirror ``_ckernels.pyx`` exactly and are used when the compiled
extension is unavailable (or when ``GROWTHCAST_PURE_PYTHON=1``).
"""
import numpy as np

# Above this exponent the bracket is evaluated as a + log(xi + e^-a).
_SWITCH = 30.0


def log_bracket(t, theta2, theta3, xi):
    """log(1 + xi * exp(-theta2 * (t - theta3))), overflow-free."""
    a = -theta2 * (np.asarray(t, dtype=float) - theta3)
    small = a <= _SWITCH
    out = np.empty_like(a)
    out[small] = np.log1p(xi * np.exp(a[small]))
    big = ~small
    if big.any():
        ab = a[big]
        out[big] = ab + np.log(xi + np.exp(-ab))
    return out


def basis_series(t, theta2, theta3, xi):
    return np.exp(-log_bracket(t, theta2, theta3, xi) / xi)


def unit_sse(y, t, theta1, theta2, theta3, xi):
    r = y - theta1 * basis_series(t, theta2, theta3, xi)
    return float(r @ r)


def basis_stats(y, t, theta2, theta3, xi):
    """Return (||h||^2, y'h) for the basis vector h over the time grid."""
    h = basis_series(t, theta2, theta3, xi)
    return float(h @ h), float(y @ h)
