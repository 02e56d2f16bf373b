import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spot_vpr.descriptor import CartContext, DescriptorParams, bin_of, describe, double_flip
from spot_vpr.mapping import Keyframe, MappingParams
from spot_vpr.io import Pose

P = DescriptorParams(h_c=1.6)


def test_bin_examples():
    assert bin_of((1.0, 0.0, 1.0), P) == (13, 13)
    assert bin_of((0.0, 0.0, 30.0), P) is None
    assert bin_of((-25 + 1e-9, 0.0, 0.0), P)[1] == 0


def test_bin_edges_go_up():
    assert bin_of((0.0, 0.0, 0.0), P) == (12, 12)
    assert bin_of((0.0, 0.0, -1.0), P) == (12, 12)
    assert bin_of((0.0, 0.0, 25.0), P) is None


def test_describe_single_point():
    kf = Keyframe(0, Pose(0, 0.0, [0, 0, 0], [0, 0, 0, 1]), np.array([[1.0, P.h_c - 3.5, 1.0]]))
    g = describe(kf, P).grid
    assert g[13, 13] == 3.5
    g[13, 13] = 0
    assert not g.any()


def test_describe_empty():
    g = describe(np.zeros((0, 3)), P).grid
    assert g.shape == (25, 25) and not g.any()


def test_describe_max_rule():
    pts = np.array([[1.0, P.h_c - 1.0, 1.0], [1.5, P.h_c - 2.5, 1.5]])
    assert describe(pts, P).grid[13, 13] == 2.5


def test_below_ground_discarded():
    assert not describe(np.array([[1.0, P.h_c + 0.5, 1.0]]), P).grid.any()


def test_describe_matches_bin_of():
    rng = np.random.default_rng(5)
    pts = rng.uniform(-30, 30, (3000, 3))
    pts[:, 1] = rng.uniform(-8, 2, 3000)
    grid = describe(pts, P).grid
    ref = np.zeros((25, 25))
    for p in pts:
        b = bin_of(p, P)
        if b is not None and P.h_c - p[1] >= 0:
            ref[b] = max(ref[b], P.h_c - p[1])
    np.testing.assert_array_equal(grid, ref)


def test_double_flip_examples():
    d = CartContext(np.array([[1, 2], [3, 4]]), DescriptorParams(1.0, m=2, n=2))
    np.testing.assert_array_equal(double_flip(d).grid, [[4, 3], [2, 1]])
    one = CartContext(np.array([[5.0]]), DescriptorParams(1.0, m=1, n=1))
    np.testing.assert_array_equal(double_flip(one).grid, [[5.0]])


def test_shape_checked():
    with pytest.raises(ValueError):
        CartContext(np.zeros((3, 3)), P)


def test_validity_against_mapping():
    P.check_against(MappingParams())  # 35.35 within tolerance of 35.3553
    with pytest.raises(ValueError):
        P.check_against(MappingParams(r_k=30.0))
    with pytest.raises(ValueError):
        P.check_against(MappingParams(r_d=20.0))


def _interior_cloud(rng, count, params):
    """Points at least 1e-6 m from every bin boundary."""
    rows = rng.integers(0, params.m, count)
    cols = rng.integers(0, params.n, count)
    pitch_z = 2 * params.r_lo / params.m
    pitch_x = 2 * params.r_la / params.n
    fz = rng.uniform(1e-3, 1 - 1e-3, count)
    fx = rng.uniform(1e-3, 1 - 1e-3, count)
    z = -params.r_lo + (rows + fz) * pitch_z
    x = -params.r_la + (cols + fx) * pitch_x
    y = params.h_c - rng.uniform(0, 10, count)
    return np.column_stack([x, y, z])


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 400))
def test_rotation_commutes_with_double_flip(seed, count):
    rng = np.random.default_rng(seed)
    cloud = _interior_cloud(rng, count, P)
    rotated = cloud * np.array([-1.0, 1.0, -1.0])
    np.testing.assert_array_equal(describe(rotated, P).grid, double_flip(describe(cloud, P)).grid)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_involution(seed):
    g = np.random.default_rng(seed).uniform(0, 5, (25, 25))
    d = CartContext(g, P)
    np.testing.assert_array_equal(double_flip(double_flip(d)).grid, g)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(25.0, 100.0), st.floats(-100.0, 100.0), st.booleans())
def test_locality(seed, far, other, along_z):
    rng = np.random.default_rng(seed)
    cloud = rng.uniform(-24, 24, (200, 3))
    extra = np.array([[other, -3.0, far]]) if along_z else np.array([[far, -3.0, other]])
    if rng.random() < 0.5:
        extra[0, 2 if along_z else 0] *= -1
    before = describe(cloud, P).grid
    after = describe(np.vstack([cloud, extra]), P).grid
    np.testing.assert_array_equal(before, after)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.lists(st.floats(-30, 30), min_size=3, max_size=3))
def test_monotone(seed, p):
    cloud = np.random.default_rng(seed).uniform(-24, 24, (200, 3))
    before = describe(cloud, P).grid
    after = describe(np.vstack([cloud, [p]]), P).grid
    assert np.all(after >= before)
    assert np.all(before >= 0)
