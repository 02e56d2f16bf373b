import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spot_vpr.descriptor import CartContext, DescriptorParams, double_flip
from spot_vpr.distance import (
    ReferenceBank,
    ShiftSet,
    cd_distance,
    flat_cosine_distance,
    query_distance_columns,
    sc_distance,
    vd_distance,
)
from spot_vpr.synthworld import oracle_vd

SMALL = ShiftSet(range(-2, 3), range(-3, 4))


def _sparse(rng, shape, fill=0.4, dyadic=False):
    g = rng.uniform(0, 8, shape) * (rng.random(shape) < fill)
    return np.round(g * 4) / 4 if dyadic else g


def test_flat_cosine_examples():
    assert flat_cosine_distance([[1, 0]], [[1, 0]]) == 0.0
    assert flat_cosine_distance([[1, 0]], [[0, 1]]) == 1.0
    assert flat_cosine_distance([[1, 1]], [[1, 0]]) == pytest.approx(1 - 1 / math.sqrt(2), abs=1e-15)
    assert flat_cosine_distance([[0, 0]], [[1, 0]]) == 1.0
    with pytest.raises(ValueError):
        flat_cosine_distance([[1, 0]], [[1, 0, 0]])


def test_shift_set_defaults():
    s = ShiftSet()
    assert s.s_lo == (-2, -1, 0, 1, 2)
    assert s.s_la == tuple(range(-5, 6))
    assert s.symmetric
    with pytest.raises(ValueError):
        ShiftSet((1, 2), (0,))
    with pytest.raises(ValueError):
        vd_distance(np.ones((3, 3)), np.ones((3, 3)), ShiftSet((-3, 0), (0,)))


def test_vd_identical_and_exact_shift():
    rng = np.random.default_rng(0)
    q = _sparse(rng, (25, 25))
    assert vd_distance(q, q) == 0.0
    r = np.zeros_like(q)
    r[:, 1:] = q[:, :-1]
    assert vd_distance(q, r, ShiftSet((0,), (0, 1))) == pytest.approx(0.0, abs=1e-15)
    assert vd_distance(q, r, ShiftSet((0,), (0,))) > 0.01


def test_vd_single_shift_is_flat():
    rng = np.random.default_rng(1)
    q, r = _sparse(rng, (7, 7)), _sparse(rng, (7, 7))
    one = ShiftSet((0,), (0,))
    assert vd_distance(q, r, one) == pytest.approx(flat_cosine_distance(q, r), abs=1e-15)
    assert oracle_vd(q, r, one) == pytest.approx(flat_cosine_distance(q, r), abs=1e-15)


def test_vd_matches_oracle():
    rng = np.random.default_rng(2)
    for _ in range(200):
        q, r = _sparse(rng, (7, 7), 0.6), _sparse(rng, (7, 7), 0.6)
        assert abs(vd_distance(q, r, SMALL) - oracle_vd(q, r, SMALL)) <= 1e-12
    assert oracle_vd(q, q, SMALL) == 0.0


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.05, 1.0))
def test_vd_symmetric(seed, fill):
    rng = np.random.default_rng(seed)
    q, r = _sparse(rng, (9, 11), fill), _sparse(rng, (9, 11), fill)
    assert vd_distance(q, r, SMALL) == vd_distance(r, q, SMALL)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.05, 1.0))
def test_vd_flip_duality(seed, fill):
    # quarter-integer heights keep every sum exact, so summation order is moot
    rng = np.random.default_rng(seed)
    p = DescriptorParams(1.0, m=9, n=11)
    q = CartContext(_sparse(rng, (9, 11), fill, dyadic=True), p)
    r = CartContext(_sparse(rng, (9, 11), fill, dyadic=True), p)
    assert vd_distance(double_flip(q), double_flip(r), SMALL) == vd_distance(q, r, SMALL)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_bounds(seed):
    rng = np.random.default_rng(seed)
    q, r = _sparse(rng, (8, 8)), _sparse(rng, (8, 8))
    for d in (vd_distance(q, r, SMALL), sc_distance(q, r), cd_distance(q, r)):
        assert 0.0 <= d <= 1.0


def test_sc_cd_examples():
    rng = np.random.default_rng(3)
    q = _sparse(rng, (6, 8), 0.8)
    assert sc_distance(q, q) == pytest.approx(0.0, abs=1e-15)
    assert cd_distance(q, q) == pytest.approx(0.0, abs=1e-15)
    shifted = np.roll(q, 2, axis=1)
    assert sc_distance(q, shifted) == pytest.approx(0.0, abs=1e-15)
    assert cd_distance(q, shifted) == pytest.approx(0.0, abs=1e-15)
    # column 0 identical, column 1 orthogonal; zero shift keeps the key best
    a = np.array([[3.0, 1.0], [0.0, 0.0]])
    b = np.array([[3.0, 0.0], [0.0, 1.0]])
    assert sc_distance(a, b) == pytest.approx(0.5)


def test_cd_not_above_zero_shift_value():
    rng = np.random.default_rng(4)
    checked = 0
    for _ in range(200):
        q, r = _sparse(rng, (6, 6), 0.7), _sparse(rng, (6, 6), 0.7)
        kq, kr = q.sum(axis=0), r.sum(axis=0)
        corr = [kq @ np.roll(kr, -s) for s in range(6)]
        if int(np.argmax(corr)) == 0:
            checked += 1
            assert cd_distance(q, r) <= flat_cosine_distance(q, r)
    assert checked > 0


def test_sc_both_empty_columns_count_zero():
    a = np.array([[1.0, 0.0], [1.0, 0.0]])
    assert sc_distance(a, a) == 0.0


# -------------------------------------------------------------- bank


def test_columns_examples():
    rng = np.random.default_rng(5)
    p = DescriptorParams(1.6)
    q = CartContext(_sparse(rng, (25, 25)), p)
    cols = query_distance_columns(q, [q])
    assert cols.sim[0] == pytest.approx(0.0, abs=1e-12)
    cols = query_distance_columns(q, [double_flip(q)])
    assert cols.opp[0] == pytest.approx(0.0, abs=1e-12)
    refs = [CartContext(_sparse(rng, (25, 25)), p) for _ in range(3)]
    cols = query_distance_columns(q, refs, query_index=4)
    assert len(cols.sim) == len(cols.opp) == 3 and cols.query_index == 4
    with pytest.raises(ValueError):
        query_distance_columns(q, [])


@pytest.mark.parametrize("metric", ["VD", "SC", "CD"])
def test_bank_matches_scalar(metric):
    rng = np.random.default_rng(6)
    refs = np.stack([_sparse(rng, (25, 25), rng.uniform(0.05, 0.6)) for _ in range(40)])
    refs[3] = 0.0  # empty reference
    q = _sparse(rng, (25, 25), 0.3)
    fn = {"VD": lambda a, b: vd_distance(a, b), "SC": sc_distance, "CD": cd_distance}[metric]
    cols = ReferenceBank(refs, chunk_size=7).columns(q, metric)
    for j, r in enumerate(refs):
        assert abs(cols.sim[j] - fn(q, r)) <= 1e-12
        assert abs(cols.opp[j] - fn(q[::-1, ::-1], r)) <= 1e-12
    assert cols.sim[3] == 1.0


def test_bank_empty_query():
    refs = np.random.default_rng(7).uniform(0, 1, (5, 25, 25))
    cols = ReferenceBank(refs).columns(np.zeros((25, 25)))
    np.testing.assert_array_equal(cols.sim, 1.0)


@pytest.mark.parametrize("metric", ["VD", "SC"])
def test_bank_worker_count_is_irrelevant(metric):
    rng = np.random.default_rng(8)
    refs = np.stack([_sparse(rng, (25, 25)) for _ in range(1300)])
    bank = ReferenceBank(refs)
    q = _sparse(rng, (25, 25))
    a = bank.columns(q, metric, workers=1)
    b = bank.columns(q, metric, workers=4)
    np.testing.assert_array_equal(a.sim, b.sim)
    np.testing.assert_array_equal(a.opp, b.opp)


def test_bank_subset_preserves_values():
    rng = np.random.default_rng(9)
    refs = np.stack([_sparse(rng, (25, 25)) for _ in range(30)])
    bank = ReferenceBank(refs)
    q = _sparse(rng, (25, 25))
    full = bank.columns(q)
    part = bank.subset([4, 17, 2]).columns(q)
    np.testing.assert_allclose(part.sim, full.sim[[4, 17, 2]], atol=1e-12)
