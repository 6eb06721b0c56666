# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled curve kernels; same contract as ``_pykernels``."""
import numpy as np
from libc.math cimport exp, log, log1p

cdef double _SWITCH = 30.0


cdef inline double _log_bracket(double t, double theta2, double theta3, double xi) nogil:
    cdef double a = -theta2 * (t - theta3)
    if a <= _SWITCH:
        return log1p(xi * exp(a))
    return a + log(xi + exp(-a))


def log_bracket(t, double theta2, double theta3, double xi):
    cdef double[::1] tv = np.ascontiguousarray(t, dtype=np.float64).ravel()
    cdef Py_ssize_t n = tv.shape[0], k
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] ov = out
    for k in range(n):
        ov[k] = _log_bracket(tv[k], theta2, theta3, xi)
    return out.reshape(np.shape(t))


def basis_series(t, double theta2, double theta3, double xi):
    cdef double[::1] tv = np.ascontiguousarray(t, dtype=np.float64).ravel()
    cdef Py_ssize_t n = tv.shape[0], k
    cdef double inv = 1.0 / xi
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] ov = out
    for k in range(n):
        ov[k] = exp(-_log_bracket(tv[k], theta2, theta3, xi) * inv)
    return out.reshape(np.shape(t))


def unit_sse(const double[::1] y, const double[::1] t, double theta1,
             double theta2, double theta3, double xi):
    cdef Py_ssize_t n = t.shape[0], k
    cdef double inv = 1.0 / xi, acc = 0.0, r
    with nogil:
        for k in range(n):
            r = y[k] - theta1 * exp(-_log_bracket(t[k], theta2, theta3, xi) * inv)
            acc += r * r
    return acc


def basis_stats(const double[::1] y, const double[::1] t, double theta2,
                double theta3, double xi):
    cdef Py_ssize_t n = t.shape[0], k
    cdef double inv = 1.0 / xi, hh = 0.0, yh = 0.0, h
    with nogil:
        for k in range(n):
            h = exp(-_log_bracket(t[k], theta2, theta3, xi) * inv)
            hh += h * h
            yh += y[k] * h
    return hh, yh
