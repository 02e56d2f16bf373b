import numpy as np
import pytest

from spot_vpr.synthworld import (
    FORWARD,
    REVERSE,
    TraversalSpec,
    World,
    WorldSpec,
    detour_scenario,
    generate_traversal,
    generate_world,
    oracle_sequence,
    oracle_vd,
    render_frame,
    render_traversal,
    route_traversal,
    true_poses,
)
from spot_vpr.distance import ShiftSet
from spot_vpr.io import Pose


def test_world_deterministic():
    a = generate_world(WorldSpec(seed=3, length=300))
    b = generate_world(WorldSpec(seed=3, length=300))
    assert a.boxes == b.boxes
    assert a.boxes != generate_world(WorldSpec(seed=4, length=300)).boxes


def test_world_density_zero():
    assert len(generate_world(WorldSpec(density=0.0))) == 0


def test_world_outside_roadway():
    w = generate_world(WorldSpec(seed=1, length=500))
    assert np.all(np.abs(w.centers[:, 1]) >= 8.0)
    # footprints stay off the road too
    assert np.all(np.abs(w.centers[:, 1]) - w.sizes[:, 1] / 2 >= 8.0 - 1e-12)


def test_reverse_forward_axis_negated():
    world = generate_world(WorldSpec(length=100))
    fwd, _ = generate_traversal(world, TraversalSpec(FORWARD, frame_step=2.0), 100.0)
    rev, _ = generate_traversal(world, TraversalSpec(REVERSE, frame_step=2.0), 100.0)
    for a, b in zip(fwd, rev):
        np.testing.assert_allclose(b.rotation_matrix()[:, 2], -a.rotation_matrix()[:, 2], atol=1e-12)


def test_step_count():
    poses, gt = generate_traversal(World([], [], []), TraversalSpec(frame_step=2.0), 100.0)
    assert len(poses) == 51 == len(gt)


def test_noise_free_ground_truth():
    poses, gt = generate_traversal(World([], [], []), TraversalSpec(lateral_offset=2.0), 50.0)
    np.testing.assert_array_equal(np.array([p.translation[:2] for p in poses]), gt.positions)
    assert np.all(gt.positions[:, 1] == -2.0)  # right of eastward travel is south


def test_pose_noise_random_walk():
    spec = TraversalSpec(pose_noise_std=0.02, seed=5)
    poses, gt = generate_traversal(World([], [], []), spec, 200.0)
    err = np.array([p.translation[:2] for p in poses]) - gt.positions
    assert err[0].tolist() == [0.0, 0.0]
    assert np.abs(err[-1]).max() > 0.0
    again, _ = generate_traversal(World([], [], []), spec, 200.0)
    assert all(np.array_equal(a.translation, b.translation) for a, b in zip(poses, again))


def test_camera_axes():
    (p,), _ = route_traversal(np.array([[0.0, 0.0], [0.5, 0.0]]), TraversalSpec(frame_step=1.0))
    R = p.rotation_matrix()
    np.testing.assert_allclose(R[:, 2], [1, 0, 0], atol=1e-12)  # forward = east
    np.testing.assert_allclose(R[:, 1], [0, 0, -1], atol=1e-12)  # down
    np.testing.assert_allclose(R[:, 0], [0, -1, 0], atol=1e-12)  # right = south


def _single_box(east, north=0.0):
    return World([[east, north]], [[2.0, 2.0]], [3.0])


def _east_pose():
    (p,), _ = route_traversal(np.array([[0.0, 0.0], [0.5, 0.0]]), TraversalSpec(frame_step=1.0))
    return Pose(0, 0.0, [0.0, 0.0, 1.6], p.rotation)


def test_render_visibility():
    pose = _east_pose()
    assert len(render_frame(_single_box(-10.0), pose, 90, 35.35)) == 0  # behind
    assert len(render_frame(_single_box(40.0), pose, 90, 35.35)) == 0  # too far
    assert len(render_frame(_single_box(10.0), pose, 90, 35.35)) > 0
    assert len(render_frame(_single_box(10.0), pose, 90, 35.35, dropout=1.0)) == 0
    assert len(render_frame(_single_box(2.0, 15.0), pose, 90, 35.35)) == 0  # outside fov
    with pytest.raises(ValueError):
        render_frame(_single_box(10.0), pose, 0, 35.35)


def test_render_geometry_consistent():
    world = generate_world(WorldSpec(seed=2, length=200))
    poses, gt = generate_traversal(world, TraversalSpec(), 200.0)
    tp = true_poses(poses, gt, 1.6)[::40]
    surface = world.tree()
    for p in tp:
        pts = render_frame(world, p, 90.0, 35.35)
        d, _ = surface.query(p.to_world(pts))
        assert np.all(d <= 1e-9)


def test_render_deterministic():
    world = generate_world(WorldSpec(seed=2, length=120))
    spec = TraversalSpec(dropout=0.4, seed=9)
    poses, gt = generate_traversal(world, spec, 120.0)
    a = render_traversal(world, true_poses(poses, gt, 1.6), spec, 35.35)
    b = render_traversal(world, true_poses(poses, gt, 1.6), spec, 35.35)
    assert all(np.array_equal(a[k], b[k]) for k in a)


def test_detour_route_leaves_corridor():
    world, wp = detour_scenario(WorldSpec(seed=0, length=1000), detour_start=400.0)
    assert wp[:, 1].max() == 100.0
    path = np.sum(np.hypot(*np.diff(wp, axis=0).T))
    # 900 m of corridor, two 95 m legs from the 5 m lane, 100 m side road
    assert path == pytest.approx(900.0 + 2 * 95.0 + 100.0)


def test_oracle_vd_examples():
    rng = np.random.default_rng(0)
    q = rng.random((7, 7))
    assert oracle_vd(q, q, ShiftSet(range(-2, 3), range(-3, 4))) == 0.0
    with pytest.raises(ValueError):
        oracle_vd(q, q, ShiftSet((-7, 0), (0,)))


def test_oracle_sequence_random_50x75():
    from spot_vpr.matching import MatchingParams, sequence_best_line

    rng = np.random.default_rng(1)
    p = MatchingParams(w=9)
    D = rng.random((50, 75))
    for sign in (1, -1):
        res = sequence_best_line(D, sign, p)
        assert oracle_sequence(D, sign, p) == (res.ref_index, res.best_sum)
