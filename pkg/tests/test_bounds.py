from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qempc.bounds import (
    BoundReport,
    compute_reports,
    control_error_report,
    delta_bound,
    first_term,
    format_report,
    jump_certificate,
    second_term_aposteriori,
    second_term_apriori,
)
from qempc.errors import StateOutsidePartitionError
from qempc.partition import Hyperplane
from qempc.quantize import FixedPointFormat, quantize_partition, quantize_scalar

EPS = 2.0**-5
H = np.array([1.0, -0.5])
X = np.array([0.75, -1.25])
FI = np.array([[0.75, 0.375]])
FJ = np.array([[0.25, 0.625]])

# expected values below come from exact rational arithmetic (fractions.Fraction)


def test_delta_value():
    assert delta_bound(H, X, EPS) == 73 / 512
    assert delta_bound(Hyperplane(H, 0.3), X, EPS) == 73 / 512


def test_first_term_value():
    assert first_term(FI, FJ, H, 73 / 512) == pytest.approx(73 / 1024, rel=1e-15)
    assert first_term(FI, FI, H, 73 / 512) == 0.0


def test_second_terms_values():
    dF = np.array([[0.01, -0.02]])
    assert second_term_aposteriori(dF, [0.005], FI, X, EPS) == pytest.approx(497 / 6400, rel=1e-15)
    assert second_term_apriori(FI, X, EPS) == 75 / 512


def test_jump_certificate():
    hp = Hyperplane([1.0], 0.0)
    assert jump_certificate(hp, [-0.1], 0.2)
    assert jump_certificate(hp, [0.0], 0.2)
    assert not jump_certificate(hp, [-0.2], 0.2)
    assert not jump_certificate(hp, [0.01], 0.2)


def _q(v, f):
    return Fraction(quantize_scalar(v, f))


entries = st.floats(-15, 15, allow_nan=False, allow_infinity=False)


@given(
    st.lists(entries, min_size=3, max_size=3),
    entries,
    st.lists(entries, min_size=3, max_size=3),
    st.sampled_from([2, 5, 9, 20]),
)
@settings(max_examples=300, deadline=None)
def test_residual_change_dominated(h, k, x, b):
    # exact residual change under rounding of h, k and x
    f = FixedPointFormat(b + 6, b)
    eps = f.eps
    exact = sum(Fraction(a) * Fraction(c) for a, c in zip(h, x)) - Fraction(k)
    quant = sum(_q(a, f) * _q(c, f) for a, c in zip(h, x)) - _q(k, f)
    assert abs(quant - exact) <= Fraction(delta_bound(h, x, eps))


@given(st.floats(0, 1), st.integers(1, 12), st.integers(1, 12))
def test_delta_monotone_in_eps(xv, b1, b2):
    lo, hi = sorted((2.0**-b1, 2.0**-b2))
    assert delta_bound(H, [xv, xv], lo) <= delta_bound(H, [xv, xv], hi)


def test_same_region_example(sat1d):
    f = FixedPointFormat(12, 5)
    r = control_error_report(sat1d, quantize_partition(sat1d, f, f), [0.999])
    assert r.same_region and r.claimed and r.region_quant == 1
    assert r.first_term == 0.0 and np.isnan(r.delta)
    assert r.second_aposteriori == 0.03125
    assert r.actual_error == pytest.approx(0.001, abs=1e-15)


def test_jump_example(gain2):
    # x = 0.1 rounds to 0 and is assigned to the lower-index region
    f = FixedPointFormat(8, 2)
    r = control_error_report(gain2, quantize_partition(gain2, f, f), [0.1])
    assert (r.region_true, r.region_quant) == (1, 0)
    assert r.jump and r.projection_in_facet and r.claimed
    assert r.delta == pytest.approx(0.5875, rel=1e-15)
    assert r.first_term == pytest.approx(0.47, rel=1e-15)
    assert r.second_aposteriori == pytest.approx(0.01, rel=1e-12)
    assert r.second_apriori == pytest.approx(0.3625, rel=1e-15)
    assert r.actual_error == pytest.approx(0.09, rel=1e-12)
    assert -r.delta < r.facet_residual <= 0


def test_fine_grid_example(sat1d):
    f = FixedPointFormat(64, 60)
    r = control_error_report(sat1d, quantize_partition(sat1d, f, f), [0.3])
    assert r.actual_error < 1e-16
    assert r.bound_aposteriori < 1e-15 and r.bound_apriori < 1e-15


def test_outside_partition(sat1d):
    f = FixedPointFormat(12, 5)
    qp = quantize_partition(sat1d, f, f)
    with pytest.raises(StateOutsidePartitionError):
        control_error_report(sat1d, qp, [7.0])
    with pytest.raises(StateOutsidePartitionError):
        compute_reports(sat1d, qp, [[7.0]])


@pytest.mark.parametrize("ab", [(12, 5), (16, 9)])
def test_reports_dominance(any_fixture, ab):
    p = any_fixture
    f = FixedPointFormat(*ab)
    qp = quantize_partition(p, f, f)
    rng = np.random.default_rng(11)
    X = rng.uniform(p.lo, p.hi, size=(5000, p.n))
    reps = compute_reports(p, qp, X)
    c = reps.claimed
    assert c.mean() > 0.99
    assert not reps.dominance_violations().any()
    assert np.all(reps.bound_aposteriori[c] <= reps.bound_apriori[c] + 1e-12)
    box = compute_reports(p, qp, X, norm_mode="box")
    assert np.all(box.bound_apriori[c] >= reps.bound_apriori[c] - 1e-12)


def test_report_round_trip(gain2):
    f = FixedPointFormat(8, 2)
    r = control_error_report(gain2, quantize_partition(gain2, f, f), [0.1])
    back = BoundReport.from_dict(r.to_dict())
    for k, v in r.to_dict().items():
        w = back.to_dict()[k]
        assert v == w
    assert "bound claimed       yes" in format_report(r)


def test_batch_indexing(het2):
    f = FixedPointFormat(12, 5)
    qp = quantize_partition(het2, f, f)
    X = np.random.default_rng(0).uniform(-15, 15, size=(50, 2))
    reps = compute_reports(het2, qp, X)
    assert len(reps) == 50
    assert reps[-1].x.tolist() == X[-1].tolist()
    sub = reps[10:20]
    assert len(sub) == 10 and sub[0].x.tolist() == X[10].tolist()
    with pytest.raises(IndexError):
        reps[50]
    assert sum(1 for _ in reps) == 50
