"""Backend selection for the curve kernels.

The compiled extension is used when it imports cleanly; setting
``GROWTHCAST_PURE_PYTHON=1`` forces the numpy fallback. Both backends take
float64 contiguous arrays for ``y`` and ``t`` in the scalar-returning kernels.
"""
import os

from . import _pykernels

BACKEND = "python"
if os.environ.get("GROWTHCAST_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels
else:
    _impl = _pykernels

log_bracket = _impl.log_bracket
basis_series = _impl.basis_series
unit_sse = _impl.unit_sse
basis_stats = _impl.basis_stats


def get_backend(name):
    """Return the kernel module for ``name`` ('python' or 'cython')."""
    if name == "python":
        return _pykernels
    if name == "cython":
        from . import _ckernels

        return _ckernels
    raise ValueError(f"unknown kernel backend {name!r}")
