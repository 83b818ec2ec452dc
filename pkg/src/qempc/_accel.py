"""Numba switch.

Set ``QEMPC_NO_NUMBA=1`` to force the pure-numpy kernels, e.g. for debugging
or on platforms where numba is unavailable.
"""
from __future__ import annotations

import os

_DISABLED = os.environ.get("QEMPC_NO_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}

try:
    if _DISABLED:
        raise ImportError("numba disabled by QEMPC_NO_NUMBA")
    from numba import njit as _njit

    HAVE_NUMBA = True
except ImportError:
    _njit = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA


def njit(func):
    """Compile ``func`` in nopython/nogil mode, or return it untouched."""
    if _njit is None:
        return func
    return _njit(cache=True, nogil=True)(func)
