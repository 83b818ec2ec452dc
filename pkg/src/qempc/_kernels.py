"""Point-location kernels.

Every kernel exists twice: an explicit loop compiled with numba (sequential
search with early exit, one state at a time) and a vectorized numpy version
that evaluates all rows for all states at once.  ``locate_float`` and
``locate_int`` are bound to the numba versions unless numba is disabled.

Regions are passed stacked: ``H`` holds every constraint row of every region,
``row_start[r]:row_start[r + 1]`` slices the rows of region ``r``.  A return
value of -1 means no region contains the state.
"""
from __future__ import annotations

import numpy as np

from ._accel import USE_NUMBA, njit


def _locate_float_loop(X, H, K, row_start, tol):
    N, n = X.shape
    n_regions = row_start.shape[0] - 1
    out = np.full(N, -1, dtype=np.int64)
    for s in range(N):
        for r in range(n_regions):
            inside = True
            for q in range(row_start[r], row_start[r + 1]):
                acc = 0.0
                for c in range(n):
                    acc += H[q, c] * X[s, c]
                if acc > K[q] + tol:
                    inside = False
                    break
            if inside:
                out[s] = r
                break
    return out


def _locate_int_loop(Xm, Hm, Ks, row_start):
    N, n = Xm.shape
    n_regions = row_start.shape[0] - 1
    out = np.full(N, -1, dtype=np.int64)
    for s in range(N):
        for r in range(n_regions):
            inside = True
            for q in range(row_start[r], row_start[r + 1]):
                acc = 0
                for c in range(n):
                    acc += Hm[q, c] * Xm[s, c]
                if acc > Ks[q]:
                    inside = False
                    break
            if inside:
                out[s] = r
                break
    return out


def _first_region(ok, row_start):
    # ok: (N, rows) bool; a region holds iff all of its rows hold
    n_regions = row_start.shape[0] - 1
    N = ok.shape[0]
    if N == 0:
        return np.empty(0, dtype=np.int64)
    region_ok = np.logical_and.reduceat(ok, row_start[:-1], axis=1)
    region_ok = region_ok[:, :n_regions]
    hit = region_ok.any(axis=1)
    first = np.argmax(region_ok, axis=1).astype(np.int64)
    first[~hit] = -1
    return first


def locate_float_numpy(X, H, K, row_start, tol):
    X = np.asarray(X, dtype=np.float64)
    ok = (X @ H.T) <= (K + tol)[None, :]
    return _first_region(ok, row_start)


def locate_int_numpy(Xm, Hm, Ks, row_start):
    """Exact integer location; also accepts object arrays of Python ints."""
    ok = (Xm @ Hm.T) <= Ks[None, :]
    return _first_region(np.asarray(ok, dtype=bool), row_start)


locate_float_loop = njit(_locate_float_loop)
locate_int_loop = njit(_locate_int_loop)

if USE_NUMBA:
    _locate_float = locate_float_loop
    _locate_int = locate_int_loop
else:
    _locate_float = locate_float_numpy
    _locate_int = locate_int_numpy


def locate_float(X, H, K, row_start, tol):
    X = np.ascontiguousarray(X, dtype=np.float64)
    return _locate_float(X, H, K, row_start, float(tol))


def locate_int(Xm, Hm, Ks, row_start):
    if Xm.dtype == object or Hm.dtype == object:
        return locate_int_numpy(Xm, Hm, Ks, row_start)
    return _locate_int(np.ascontiguousarray(Xm), Hm, Ks, row_start)
