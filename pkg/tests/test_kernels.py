import os
import subprocess
import sys

import numpy as np
import pytest

from qempc import _kernels
from qempc._accel import HAVE_NUMBA
from qempc.quantize import FixedPointFormat, quantize_partition


def _data(p):
    return p.H_all, p.K_all, p.row_start


def test_float_kernels_agree(any_fixture):
    p = any_fixture
    H, K, rs = _data(p)
    rng = np.random.default_rng(0)
    X = rng.uniform(p.lo * 1.1, p.hi * 1.1, size=(5000, p.n))
    # dyadic states land exactly on facets and exercise the tie rule
    X[:500] = np.round(X[:500] * 4) / 4
    a = _kernels._locate_float_loop(X, H, K, rs, p.tol)
    b = _kernels.locate_float_numpy(X, H, K, rs, p.tol)
    c = _kernels.locate_float(X, H, K, rs, p.tol)
    assert np.array_equal(a, b) and np.array_equal(b, c)
    assert np.any(a == -1)


def test_int_kernels_agree(het2):
    qp = quantize_partition(het2, FixedPointFormat(16, 9), FixedPointFormat(16, 9))
    X = np.random.default_rng(1).uniform(-15, 15, size=(3000, 2))
    Xm = qp.state_mantissas(X)
    Hm, Ks = qp._location_data
    rs = het2.row_start
    a = _kernels._locate_int_loop(Xm, Hm, Ks, rs)
    b = _kernels.locate_int_numpy(Xm, Hm, Ks, rs)
    c = _kernels.locate_int(Xm, Hm, Ks, rs)
    d = _kernels.locate_int_numpy(Xm.astype(object), Hm.astype(object), Ks.astype(object), rs)
    assert np.array_equal(a, b) and np.array_equal(b, c) and np.array_equal(c, d)


def test_empty_input(sat1d):
    H, K, rs = _data(sat1d)
    assert _kernels.locate_float(np.empty((0, 1)), H, K, rs, 0.0).shape == (0,)
    assert _kernels.locate_float_numpy(np.empty((0, 1)), H, K, rs, 0.0).shape == (0,)


@pytest.mark.skipif(not HAVE_NUMBA, reason="numba not installed")
def test_numba_selected_by_default():
    assert _kernels.USE_NUMBA
    assert _kernels._locate_float is _kernels.locate_float_loop


def test_env_flag_selects_numpy():
    code = (
        "import qempc._kernels as k, qempc._accel as a;"
        "assert not a.USE_NUMBA and k._locate_float is k.locate_float_numpy;"
        "from qempc.fixtures import load_fixture; from qempc.partition import locate;"
        "print(locate(load_fixture('SAT1D'), [0.5]))"
    )
    env = dict(os.environ, QEMPC_NO_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "1"
