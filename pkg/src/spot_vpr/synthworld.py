"""Synthetic corridor worlds, traversals and brute-force oracles.

A world is a set of axis-aligned boxes standing on the ground plane (z = 0)
either side of a straight east-running road. Traversals march a camera
along a polyline at a fixed spacing; the camera looks along the direction
of travel with its y axis pointing down. Rendering samples box surfaces on
a fixed grid and keeps what falls inside the camera's horizontal field of
view and depth range. There is no occlusion.

The two ``oracle_*`` functions are deliberately naive re-statements of the
distance and sequence-search definitions. They share no code with
``distance`` or ``matching`` and exist only to check them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.transform import Rotation

from .io import GroundTruthTrack, Pose

FORWARD = "forward"
REVERSE = "reverse"


class Box(NamedTuple):
    center: tuple  # (east, north)
    size: tuple  # (east extent, north extent)
    height: float


@dataclass(frozen=True)
class WorldSpec:
    seed: int = 0
    length: float = 1000.0
    half_width: float = 8.0
    density: float = 16.0  # objects per 100 m, both sides together
    size_range: tuple = (2.0, 9.0)
    height_range: tuple = (1.0, 9.0)
    setback_range: tuple = (0.0, 8.0)
    surface_pitch: float = 0.5


@dataclass(frozen=True)
class TraversalSpec:
    direction: str = FORWARD
    lateral_offset: float = 0.0  # metres to the right of the direction of travel
    frame_step: float = 0.7
    fov_deg: float = 90.0
    dropout: float = 0.0
    pose_noise_std: float = 0.0  # random-walk std per frame, metres, each axis
    seed: int = 0
    camera_height: float = 1.6
    frame_period: float = 0.1

    def __post_init__(self):
        if self.frame_step <= 0:
            raise ValueError("frame_step must be positive")
        if not 0.0 <= self.dropout <= 1.0:
            raise ValueError("dropout must lie in [0, 1]")
        if self.direction not in (FORWARD, REVERSE):
            raise ValueError(f"direction must be {FORWARD!r} or {REVERSE!r}")


class World:
    def __init__(self, centers, sizes, heights, surface_pitch: float = 0.5):
        self.centers = np.asarray(centers, dtype=np.float64).reshape(-1, 2)
        self.sizes = np.asarray(sizes, dtype=np.float64).reshape(-1, 2)
        self.heights = np.asarray(heights, dtype=np.float64).reshape(-1)
        self.surface_pitch = surface_pitch
        self._surface = None
        self._tree = None

    def __len__(self):
        return len(self.centers)

    def __iter__(self):
        for c, s, h in zip(self.centers, self.sizes, self.heights):
            yield Box(tuple(c), tuple(s), float(h))

    @property
    def boxes(self) -> list[Box]:
        return list(self)

    def merged(self, other: "World") -> "World":
        return World(
            np.vstack([self.centers, other.centers]),
            np.vstack([self.sizes, other.sizes]),
            np.concatenate([self.heights, other.heights]),
            self.surface_pitch,
        )

    def without(self, mask) -> "World":
        keep = ~np.asarray(mask, dtype=bool)
        return World(self.centers[keep], self.sizes[keep], self.heights[keep], self.surface_pitch)

    def surface_points(self) -> np.ndarray:
        """(P, 3) grid samples of every box's side and top faces."""
        if self._surface is None:
            parts = [_box_surface(c, s, h, self.surface_pitch) for c, s, h in zip(self.centers, self.sizes, self.heights)]
            self._surface = np.vstack(parts) if parts else np.zeros((0, 3))
        return self._surface

    def tree(self) -> cKDTree:
        if self._tree is None:
            self._tree = cKDTree(self.surface_points())
        return self._tree


def _axis_samples(lo: float, hi: float, pitch: float) -> np.ndarray:
    n = max(int(math.floor((hi - lo) / pitch + 1e-9)), 0)
    return lo + pitch * np.arange(n + 1)


def _box_surface(center, size, height, pitch) -> np.ndarray:
    cx, cy = center
    sx, sy = size
    x0, x1, y0, y1 = cx - sx / 2, cx + sx / 2, cy - sy / 2, cy + sy / 2
    xs = _axis_samples(x0, x1, pitch)
    ys = _axis_samples(y0, y1, pitch)
    zs = _axis_samples(0.0, height, pitch)
    faces = []
    for y in (y0, y1):
        gx, gz = np.meshgrid(xs, zs, indexing="ij")
        faces.append(np.column_stack([gx.ravel(), np.full(gx.size, y), gz.ravel()]))
    for x in (x0, x1):
        gy, gz = np.meshgrid(ys, zs, indexing="ij")
        faces.append(np.column_stack([np.full(gy.size, x), gy.ravel(), gz.ravel()]))
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    faces.append(np.column_stack([gx.ravel(), gy.ravel(), np.full(gx.size, height)]))
    return np.vstack(faces)


def generate_world(spec: WorldSpec) -> World:
    """Boxes either side of the road y = 0 for 0 <= east <= length."""
    rng = np.random.default_rng(spec.seed)
    count = int(round(spec.density * spec.length / 100.0))
    if count == 0:
        return World(np.zeros((0, 2)), np.zeros((0, 2)), np.zeros(0), spec.surface_pitch)
    along = rng.uniform(0.0, spec.length, count)
    side = np.where(rng.random(count) < 0.5, -1.0, 1.0)
    sizes = rng.uniform(*spec.size_range, size=(count, 2))
    heights = rng.uniform(*spec.height_range, size=count)
    setback = rng.uniform(*spec.setback_range, size=count)
    lateral = side * (spec.half_width + sizes[:, 1] / 2 + setback)
    return World(np.column_stack([along, lateral]), sizes, heights, spec.surface_pitch)


# ----------------------------------------------------------------- traversals


def camera_pose(frame_id: int, t_sec: float, position, heading: float) -> Pose:
    """Pose for a level camera at ``position`` looking along ``heading`` (rad from east)."""
    c, s = math.cos(heading), math.sin(heading)
    # columns: camera x (right), y (down), z (forward) expressed in the world
    R = np.array([[s, 0.0, c], [-c, 0.0, s], [0.0, -1.0, 0.0]])
    return Pose(frame_id, t_sec, position, Rotation.from_matrix(R).as_quat())


def sample_route(waypoints, step: float):
    """Positions and headings every ``step`` metres of arc length along a polyline."""
    wp = np.asarray(waypoints, dtype=np.float64).reshape(-1, 2)
    seg = np.diff(wp, axis=0)
    seg_len = np.hypot(seg[:, 0], seg[:, 1])
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])
    total = cum[-1]
    n = int(math.floor(total / step + 1e-9)) + 1
    s = step * np.arange(n)
    idx = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(seg) - 1)
    frac = (s - cum[idx]) / seg_len[idx]
    pos = wp[idx] + frac[:, None] * seg[idx]
    heading = np.arctan2(seg[idx, 1], seg[idx, 0])
    return pos, heading


def corridor_waypoints(length: float, spec: TraversalSpec) -> np.ndarray:
    if spec.direction == FORWARD:
        return np.array([[0.0, -spec.lateral_offset], [length, -spec.lateral_offset]])
    return np.array([[length, spec.lateral_offset], [0.0, spec.lateral_offset]])


def route_traversal(waypoints, spec: TraversalSpec) -> tuple[list[Pose], GroundTruthTrack]:
    pos, heading = sample_route(waypoints, spec.frame_step)
    noise = np.zeros((len(pos), 3))
    if spec.pose_noise_std > 0 and len(pos) > 1:
        rng = np.random.default_rng([spec.seed, 7])
        steps = rng.normal(0.0, spec.pose_noise_std, size=(len(pos) - 1, 3))
        noise[1:] = np.cumsum(steps, axis=0)
    poses = []
    for i, (p, h) in enumerate(zip(pos, heading)):
        xyz = np.array([p[0], p[1], spec.camera_height]) + noise[i]
        poses.append(camera_pose(i, i * spec.frame_period, xyz, float(h)))
    return poses, GroundTruthTrack(pos)


def generate_traversal(world: World, spec: TraversalSpec, length: Optional[float] = None):
    """Straight pass along the corridor; returns (poses, ground truth per frame)."""
    if length is None:
        length = float(world.centers[:, 0].max()) if len(world) else 0.0
    return route_traversal(corridor_waypoints(length, spec), spec)


def true_poses(poses: Sequence[Pose], gt: GroundTruthTrack, camera_height: float) -> list[Pose]:
    """Noise-free copies of ``poses`` placed at the ground-truth positions."""
    out = []
    for p, xy in zip(poses, gt.positions):
        out.append(Pose(p.frame_id, p.t_sec, [xy[0], xy[1], camera_height], p.rotation))
    return out


def render_frame(world: World, pose: Pose, fov_deg: float, r_d: float, dropout: float = 0.0, seed=0) -> np.ndarray:
    """Camera-frame surface points visible from ``pose``."""
    if not 0.0 < fov_deg <= 180.0:
        raise ValueError("fov_deg must lie in (0, 180]")
    if len(world) == 0:
        return np.zeros((0, 3))
    idx = np.sort(np.asarray(world.tree().query_ball_point(pose.translation, r_d), dtype=np.intp))
    cam = pose.to_camera(world.surface_points()[idx])
    x, z = cam[:, 0], cam[:, 2]
    half = math.radians(fov_deg) / 2.0
    keep = (z > 0) & (np.abs(np.arctan2(x, z)) <= half) & (np.linalg.norm(cam, axis=1) <= r_d)
    cam = cam[keep]
    if dropout > 0:
        rng = np.random.default_rng(seed)
        cam = cam[rng.random(len(cam)) >= dropout]
    return cam


def render_traversal(world: World, true_pose_list: Sequence[Pose], spec: TraversalSpec, r_d: float) -> dict:
    """Render every frame from the true poses; keyed by frame_id."""
    return {
        p.frame_id: render_frame(world, p, spec.fov_deg, r_d, spec.dropout, seed=(spec.seed, p.frame_id))
        for p in true_pose_list
    }


# ---------------------------------------------------------------- scenarios


def _road_strip_mask(world: World, a, b, half_width: float) -> np.ndarray:
    """Boxes whose footprint intersects the axis-aligned road strip a->b."""
    lo = np.minimum(a, b) - half_width
    hi = np.maximum(a, b) + half_width
    bl = world.centers - world.sizes / 2
    bh = world.centers + world.sizes / 2
    return np.all((bh > lo) & (bl < hi), axis=1)


def detour_scenario(
    spec: WorldSpec,
    detour_start: float,
    side_length: float = 100.0,
    side_offset: float = 100.0,
    lateral_offset: float = 5.0,
):
    """World with a side loop north of the corridor, plus a reverse route using it.

    The route runs west at ``lateral_offset`` north of the centreline, turns
    north at ``detour_start + side_length``, runs west along the side road
    and rejoins at ``detour_start``. Returns (world, waypoints).
    """
    a, b = detour_start, detour_start + side_length
    base = generate_world(spec)
    side = generate_world(
        WorldSpec(spec.seed + 101, side_length, spec.half_width, spec.density, spec.size_range,
                  spec.height_range, spec.setback_range, spec.surface_pitch)
    )
    side = World(side.centers + [a, side_offset], side.sizes, side.heights, spec.surface_pitch)
    legs = []
    for k, x in enumerate((a, b)):
        leg = generate_world(
            WorldSpec(spec.seed + 202 + k, side_offset, spec.half_width, spec.density, spec.size_range,
                      spec.height_range, spec.setback_range, spec.surface_pitch)
        )
        # rotate the leg corridor to run north from the main road
        legs.append(World(np.column_stack([leg.centers[:, 1] + x, leg.centers[:, 0]]), leg.sizes[:, ::-1],
                          leg.heights, spec.surface_pitch))
    world = base.merged(side)
    for leg in legs:
        world = world.merged(leg)
    roads = [
        (np.array([a, lateral_offset]), np.array([a, side_offset])),
        (np.array([b, lateral_offset]), np.array([b, side_offset])),
        (np.array([a, side_offset]), np.array([b, side_offset])),
        (np.array([0.0, 0.0]), np.array([spec.length, 0.0])),
    ]
    blocked = np.zeros(len(world), dtype=bool)
    for p, q in roads:
        blocked |= _road_strip_mask(world, p, q, spec.half_width * 0.75)
    world = world.without(blocked)
    waypoints = np.array(
        [
            [spec.length, lateral_offset],
            [b, lateral_offset],
            [b, side_offset],
            [a, side_offset],
            [a, lateral_offset],
            [0.0, lateral_offset],
        ]
    )
    return world, waypoints


# ------------------------------------------------------------------- oracles


def _oracle_cosine_distance(a_list, b_list) -> float:
    dot = 0.0
    na = 0.0
    nb = 0.0
    for a, b in zip(a_list, b_list):
        dot += a * b
        na += a * a
        nb += b * b
    if na == 0.0 or nb == 0.0:
        return 1.0
    return 1.0 - dot / math.sqrt(na * nb)


def oracle_vd(Q, R, shifts) -> float:
    """Literal enumeration of every (k, l) overlap with copied submatrices."""
    Q = np.array(getattr(Q, "grid", Q), dtype=np.float64)
    R = np.array(getattr(R, "grid", R), dtype=np.float64)
    m, n = Q.shape
    s_lo = sorted(set(shifts.s_lo))
    s_la = sorted(set(shifts.s_la))
    for k in s_lo:
        if abs(k) >= m:
            raise ValueError("longitudinal shift too large")
    for l in s_la:
        if abs(l) >= n:
            raise ValueError("lateral shift too large")
    best = None
    for k in s_lo:
        for l in s_la:
            # 1-based indices as written in the distance definition
            i_q, j_q = max(1, -k + 1), max(1, -l + 1)
            i_r, j_r = max(1, k + 1), max(1, l + 1)
            h, w = m - abs(k), n - abs(l)
            q_patch = []
            r_patch = []
            for di in range(h):
                for dj in range(w):
                    q_patch.append(float(Q[i_q - 1 + di, j_q - 1 + dj]))
                    r_patch.append(float(R[i_r - 1 + di, j_r - 1 + dj]))
            d = _oracle_cosine_distance(q_patch, r_patch)
            d = min(max(d, 0.0), 1.0)
            if best is None or d < best:
                best = d
    return best


def oracle_sequence(D, sign: int, params) -> tuple[int, float]:
    """Triple loop over (centre reference, slope, window column)."""
    D = np.asarray(D, dtype=np.float64)
    n_ref, n_q = D.shape
    w = params.w
    half = (w - 1) // 2
    if n_q < w:
        raise ValueError("not enough query columns")
    t_c = n_q - 1 - half
    if params.n_v == 1:
        slopes = [params.v_min]
    else:
        slopes = list(np.linspace(params.v_min, params.v_max, params.n_v))
    best_ref, best_sum = None, None
    for r in range(n_ref):
        for v in slopes:
            total = 0.0
            valid = True
            for t in range(n_q - w, n_q):
                j = r + math.floor(sign * v * float(t - t_c) + 0.5)
                if j < 0 or j >= n_ref:
                    valid = False
                    break
                total += float(D[j, t])
            if not valid:
                continue
            if best_sum is None or total < best_sum:
                best_ref, best_sum = r, total
    if best_ref is None:
        raise ValueError("insufficient references")
    return best_ref, best_sum
