import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qempc.bounds import compute_reports
from qempc.partition import Hyperplane, evaluate_many, locate_many, validate_partition
from qempc.quantize import FixedPointFormat, quantize_partition
from qempc.rescale import (
    ScalingTransform,
    compute_scaling,
    normalize_row,
    rescale_partition,
    rescaled_control_bound,
    rescaled_delta_bound,
)


def test_scaling_examples():
    assert np.array_equal(compute_scaling([-15, -15], [15, 15]).D, np.diag([1 / 15, 1 / 15]))
    assert np.array_equal(compute_scaling([-1, -1], [1, 1]).D, np.eye(2))
    assert np.array_equal(compute_scaling([-1], [4]).d, [0.25])


@pytest.mark.parametrize("lo, hi", [([0.0], [0.0]), ([-np.inf], [1.0]), ([1.0], [0.0])])
def test_scaling_rejects_degenerate_box(lo, hi):
    with pytest.raises(ValueError):
        compute_scaling(lo, hi)


def test_scaling_transform_validation():
    with pytest.raises(ValueError):
        ScalingTransform([1.0, 0.0])
    s = ScalingTransform([0.5, 2.0])
    assert np.array_equal(s.undo(s.apply([3.0, -1.0])), [3.0, -1.0])


def test_normalize_row_example():
    h, k = normalize_row([2.0, 0.0], 30.0, np.array([1 / 15, 1 / 15]))
    assert np.allclose(h, [1.0, 0.0], rtol=1e-15) and k == pytest.approx(1.0, rel=1e-15)


def test_sat1d_rescaled(sat1d):
    ps = rescale_partition(sat1d, compute_scaling(sat1d.lo, sat1d.hi))
    r1 = ps.regions[1]
    assert np.allclose(r1.H[0], [1.0]) and r1.K[0] == pytest.approx(0.2)
    assert ps.laws[1].F[0, 0] == pytest.approx(5.0)
    assert np.allclose(ps.lo, [-1.0]) and np.allclose(ps.hi, [1.0])
    assert np.allclose(ps.scaling, [0.2])


def test_rescaled_rows_are_normalized(any_fixture):
    p = any_fixture
    ps = rescale_partition(p, compute_scaling(p.lo, p.hi))
    assert np.all(np.sum(np.abs(ps.H_all), axis=1) <= 1 + 1e-15)
    assert np.all(np.abs(ps.K_all) <= 1 + 1e-15)
    validate_partition(ps)


def test_rescaled_delta_values():
    assert rescaled_delta_bound(2.0**-5, 2) == 0.126953125
    assert rescaled_delta_bound(0.1, 3) == pytest.approx(0.53, rel=1e-15)


def test_rescaled_control_bound_values():
    # exact rational values
    hp = Hyperplane([1.0], 0.2)
    got = rescaled_control_bound([[1.0]], [[0.0]], hp, np.diag([0.2]), [0.2], 2.0**-5, 2.0**-5)
    assert got == pytest.approx(1711 / 2560, rel=1e-14)
    hp2 = Hyperplane([0.5, -0.5], 0.0)
    D = ScalingTransform([1 / 16, 1 / 16])
    got2 = rescaled_control_bound([[0.75, 0.375]], [[0.25, 0.625]], hp2, D, [0.5, -0.25], 2.0**-9, 2.0**-9)
    assert got2 == pytest.approx(17421 / 131072, rel=1e-14)
    got3 = rescaled_control_bound([[0.75, 0.375]], [[0.25, 0.625]], hp2, D.d, [0.5, -0.25], 2.0**-9, 2.0**-9)
    assert got3 == got2


@pytest.mark.parametrize("seed", [0, 1])
def test_membership_and_law_equivalence(any_fixture, seed):
    p = any_fixture
    s = compute_scaling(p.lo, p.hi)
    ps = rescale_partition(p, s)
    X = np.random.default_rng(seed).uniform(p.lo, p.hi, size=(2000, p.n))
    r = locate_many(p, X)
    rs = locate_many(ps, s.apply(X))
    agree = r == rs
    # disagreements only where a state sits within rounding distance of a facet
    assert agree.mean() > 0.999
    U = evaluate_many(p, r, X)
    Us = evaluate_many(ps, r, s.apply(X))
    assert np.allclose(U, Us, rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("b", [5, 9])
def test_rescaled_delta_dominates_reports(any_fixture, b):
    p = any_fixture
    ps = rescale_partition(p, compute_scaling(p.lo, p.hi))
    f = FixedPointFormat(b + 4, b)
    qp = quantize_partition(ps, f, FixedPointFormat(b + 8, b))
    X = np.random.default_rng(5).uniform(ps.lo, ps.hi, size=(4000, p.n))
    reps = compute_reports(ps, qp, X)
    d = reps.delta[reps.jump]
    assert np.all(d <= rescaled_delta_bound(f.eps, p.n) + 1e-15)
    assert not reps.dominance_violations().any()


@given(st.lists(st.floats(0.01, 100), min_size=1, max_size=4))
def test_scaling_maps_box_to_unit(widths):
    w = np.array(widths)
    s = compute_scaling(-w, 0.5 * w)
    assert np.allclose(np.max(np.abs(s.apply(np.stack([-w, 0.5 * w]))), axis=0), 1.0)
