import json

import numpy as np
import pytest

from qempc.errors import ContinuityError, DimensionMismatchError, EmptyRegionError, MalformedDocumentError
from qempc.partition import (
    Hyperplane,
    check_assumptions,
    continuity_residuals,
    dump_partition,
    evaluate_law,
    find_facet_pairs,
    load_partition,
    locate,
    locate_many,
    partition_from_document,
    project_onto_hyperplane,
)


def brute_locate(p, x, tol):
    for r, reg in enumerate(p.regions):
        if all(float(reg.H[q] @ x) <= reg.K[q] + tol for q in range(reg.n_constraints)):
            return r
    return None


def test_load_sat1d(sat1d):
    assert sat1d.n_regions == 3 and sat1d.n == 1 and sat1d.m == 1


def test_continuity_violation_reports_pair(sat1d_doc):
    sat1d_doc["regions"][2]["G"] = [2.0]
    with pytest.raises(ContinuityError) as info:
        load_partition(json.dumps(sat1d_doc))
    assert info.value.pair.regions == (1, 2)
    assert info.value.residual == pytest.approx(1.0)


def test_dimension_mismatch(sat1d_doc):
    sat1d_doc["regions"][0]["K"] = [-1.0]
    with pytest.raises(DimensionMismatchError):
        load_partition(json.dumps(sat1d_doc))


@pytest.mark.parametrize("text", ["not json", "[1, 2]", '{"n": 1}'])
def test_malformed(text):
    with pytest.raises(MalformedDocumentError):
        load_partition(text)


def test_empty_region_detected(sat1d_doc):
    # x <= -1 and x >= 1 cannot both hold
    sat1d_doc["regions"][0]["K"] = [-1.0, -1.0]
    del sat1d_doc["regions"][0]["witness"]
    with pytest.raises(EmptyRegionError):
        load_partition(json.dumps(sat1d_doc))


def test_bad_witness_rejected(sat1d_doc):
    sat1d_doc["regions"][1]["witness"] = [3.0]
    with pytest.raises(EmptyRegionError):
        load_partition(json.dumps(sat1d_doc))


def test_round_trip_document(any_fixture):
    again = load_partition(dump_partition(any_fixture))
    assert np.array_equal(again.H_all, any_fixture.H_all)
    assert np.array_equal(again.K_all, any_fixture.K_all)
    assert np.array_equal(again.F_all, any_fixture.F_all)
    assert np.array_equal(again.G_all, any_fixture.G_all)


def test_accepts_bytes_and_streams(sat1d):
    import io

    text = dump_partition(sat1d)
    assert load_partition(text.encode()).n_regions == 3
    assert load_partition(io.BytesIO(text.encode())).n_regions == 3


@pytest.mark.parametrize("x, expected", [(0.5, 1), (-1.0, 0), (7.0, None)])
def test_locate_sat1d(sat1d, x, expected):
    assert locate(sat1d, [x]) == expected


def test_locate_matches_brute_force(any_fixture):
    p = any_fixture
    rng = np.random.default_rng(11)
    span = p.hi - p.lo
    X = p.lo - 0.1 * span + 1.2 * span * rng.random((500, p.n))
    got = locate_many(p, X)
    for x, r in zip(X, got):
        want = brute_locate(p, x, p.tol)
        assert (None if r < 0 else int(r)) == want
        if want is not None:
            assert np.all(p.regions[want].H @ x <= p.regions[want].K + p.tol)


def test_locate_is_deterministic(het2):
    X = np.random.default_rng(3).uniform(-15, 15, size=(200, 2))
    assert np.array_equal(locate_many(het2, X), locate_many(het2, X))


@pytest.mark.parametrize("i, x, u", [(1, 0.3, 0.3), (2, 4.0, 1.0), (0, -2.0, -1.0)])
def test_evaluate_law(sat1d, i, x, u):
    assert evaluate_law(sat1d, i, [x]) == pytest.approx([u])


def test_evaluate_law_bad_index(sat1d):
    with pytest.raises(IndexError):
        evaluate_law(sat1d, 3, [0.0])


def test_facet_pairs_sat1d(sat1d):
    pairs = find_facet_pairs(sat1d, 0.01)
    got = {(fp.regions, fp.hp.k) for fp in pairs}
    assert got == {((0, 1), -1.0), ((1, 2), 1.0)}
    for fp in pairs:
        # h x <= k on region j
        assert fp.hp.h[0] == 1.0
        assert fp.j < fp.i


def test_facet_pairs_single_region():
    doc = {
        "n": 1,
        "m": 1,
        "state_box": {"lo": [-1.0], "hi": [1.0]},
        "regions": [{"H": [[1.0], [-1.0]], "K": [1.0, 1.0], "F": [[2.0]], "G": [0.0]}],
    }
    p = load_partition(json.dumps(doc))
    assert find_facet_pairs(p) == []


def test_facet_pairs_gain2(gain2):
    pairs = find_facet_pairs(gain2, 0.01)
    assert [(fp.i, fp.j, fp.hp.k) for fp in pairs] == [(1, 0, 0.0)]


def test_facet_pairs_het2(het2):
    regions = sorted(fp.regions for fp in het2.facet_pairs)
    assert regions == [(0, 1), (0, 3), (1, 2), (1, 4), (2, 5), (3, 4), (4, 5)]
    for fp in het2.facet_pairs:
        assert np.linalg.norm(fp.hp.h) == pytest.approx(1.0)
        # the stored rows carry the same hyperplane up to positive scaling
        rj = fp.facet_row(het2, "j")
        ri = fp.facet_row(het2, "i")
        for row in (rj, ri):
            scale = np.linalg.norm(row.h)
            assert np.allclose(row.h / scale, fp.hp.h) and row.k / scale == pytest.approx(fp.hp.k, abs=1e-12)


def test_continuity_property(any_fixture):
    for fp, residual in continuity_residuals(any_fixture, n_probes=64, seed=9):
        assert residual <= 1e-8, fp


def test_projection_examples():
    xp, t = project_onto_hyperplane([0.0, 0.0], Hyperplane([1.0, 0.0], 1.0))
    assert np.array_equal(xp, [1.0, 0.0]) and t == 1.0
    xp, t = project_onto_hyperplane([2.0, 2.0], Hyperplane([1.0, 1.0], 2.0))
    assert t == -1.0 and np.array_equal(xp, [1.0, 1.0])
    xp, t = project_onto_hyperplane([0.5, 0.5], Hyperplane([1.0, 1.0], 1.0))
    assert t == 0.0 and np.array_equal(xp, [0.5, 0.5])


def test_projection_idempotent():
    rng = np.random.default_rng(5)
    for _ in range(200):
        hp = Hyperplane(rng.normal(size=3), rng.normal())
        xp, _ = project_onto_hyperplane(rng.normal(size=3) * 10, hp)
        _, t = project_onto_hyperplane(xp, hp)
        assert abs(t) < 1e-12
        assert abs(hp.h @ xp - hp.k) < 1e-12


def test_projection_sign_on_lower_side(het2):
    rng = np.random.default_rng(8)
    for fp in het2.facet_pairs:
        X = rng.uniform(-15, 15, size=(50, 2))
        for x in X[fp.hp.residual(X) <= 0]:
            assert project_onto_hyperplane(x, fp.hp)[1] >= 0


def test_zero_normal_rejected():
    from qempc.errors import PartitionError

    with pytest.raises(PartitionError):
        Hyperplane([0.0, 0.0], 1.0)


def test_check_assumptions(sat1d, box2):
    pair = next(fp for fp in find_facet_pairs(sat1d, 0.01) if fp.regions == (1, 2))
    assert check_assumptions(sat1d, pair, [0.99]) == {"projection_in_facet": True, "x_on_correct_side": True}
    (pair,) = box2.facet_pairs
    assert (pair.i, pair.j) == (1, 0)
    assert check_assumptions(box2, pair, [0.9, 0.5]) == {"projection_in_facet": True, "x_on_correct_side": True}
    assert check_assumptions(box2, pair, [0.9, 7.0])["projection_in_facet"] is False


def test_partition_requires_matching_laws(sat1d_doc):
    sat1d_doc["regions"][0]["F"] = [[0.0, 1.0]]
    with pytest.raises(DimensionMismatchError):
        partition_from_document(sat1d_doc)
