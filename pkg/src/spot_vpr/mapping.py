"""Point accumulation and equi-spaced keyframe generation.

Per-frame structure is projected into the world frame and appended to a
rolling cloud. Path distance (sum of position increments) drives keyframe
emission: the first keyframe waits until the total path exceeds 1.5 r_k,
later ones fire whenever the distance since the last keyframe exceeds s.
At each keyframe the cloud is re-expressed in the current camera frame,
cropped to r_k for the keyframe and culled to r_a for storage.

"Horizontal" always means the camera x-z plane at the triggering pose.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from .io import FrameObservation, Pose


@dataclass(frozen=True)
class MappingParams:
    r_d: float = 35.35
    r_k: float = 35.35
    r_a: float = 90.0
    s: float = 2.0

    def __post_init__(self):
        if not (self.r_d > 0 and self.s > 0):
            raise ValueError("r_d and s must be positive")
        if not (0 < self.r_k <= self.r_a):
            raise ValueError(f"need 0 < r_k <= r_a, got r_k={self.r_k}, r_a={self.r_a}")

    @property
    def warmup_distance(self) -> float:
        return 1.5 * self.r_k


@dataclass
class Keyframe:
    index: int
    pose: Pose
    points_cam: np.ndarray


@dataclass
class AccumulationState:
    # chunks are stored coordinate-major, (3, n), so transforms are one BLAS call
    chunks: list = field(default_factory=list)
    path_distance_since_keyframe: float = 0.0
    total_path_distance: float = 0.0
    last_position: Optional[np.ndarray] = None
    warmup_done: bool = False
    keyframe_count: int = 0

    def _cloud(self) -> np.ndarray:
        if not self.chunks:
            return np.zeros((3, 0))
        if len(self.chunks) > 1:
            self.chunks = [np.concatenate(self.chunks, axis=1)]
        return self.chunks[0]

    @property
    def world_points(self) -> np.ndarray:
        """(N, 3) view of the accumulated world-frame cloud."""
        return self._cloud().T

    @world_points.setter
    def world_points(self, pts: np.ndarray):
        pts = np.asarray(pts, dtype=np.float64).reshape(-1, 3)
        self.chunks = [np.ascontiguousarray(pts.T)]

    def __len__(self):
        return sum(c.shape[1] for c in self.chunks)


def depth_to_points(depth_image, intrinsics, r_d: float) -> np.ndarray:
    """Back-project sparse depth pixels into the camera frame.

    ``depth_image`` is either a mapping ``{(u, v): depth}`` or an (N, 3)
    array of ``(u, v, depth)`` rows. ``intrinsics`` is ``(fx, fy, cx, cy)``.
    Pixels deeper than ``r_d`` are dropped.
    """
    if isinstance(depth_image, Mapping):
        rows = [(u, v, d) for (u, v), d in depth_image.items()]
        uvd = np.array(rows, dtype=np.float64).reshape(-1, 3)
    else:
        uvd = np.asarray(depth_image, dtype=np.float64).reshape(-1, 3)
    fx, fy, cx, cy = (float(v) for v in intrinsics)
    if not (fx > 0 and fy > 0 and np.isfinite([cx, cy]).all()):
        raise ValueError("intrinsics must be finite with fx, fy > 0")
    d = uvd[:, 2]
    if np.any(~(d > 0)):
        raise ValueError("depths must be positive")
    uvd = uvd[d <= r_d]
    u, v, d = uvd[:, 0], uvd[:, 1], uvd[:, 2]
    return np.column_stack([(u - cx) * d / fx, (v - cy) * d / fy, d])


def _to_camera(cloud: np.ndarray, pose: Pose) -> np.ndarray:
    """(3, N) world cloud -> (3, N) camera frame of ``pose``."""
    R = pose.rotation_matrix()
    return R.T @ (cloud - pose.translation[:, None])


def _within(cam: np.ndarray, radius: float) -> np.ndarray:
    # squared comparison; hypot is several times slower on large clouds
    return cam[0] * cam[0] + cam[2] * cam[2] <= radius * radius


def extract_keyframe(state: AccumulationState, pose: Pose, r_k: float, index: Optional[int] = None) -> Keyframe:
    """Express the accumulated cloud in ``pose``'s camera frame, cropped to r_k."""
    cam = _to_camera(state._cloud(), pose)
    keep = _within(cam, r_k)
    idx = state.keyframe_count if index is None else index
    return Keyframe(idx, pose, np.compress(keep, cam, axis=1).T)


def advance_frame(state: AccumulationState, obs: FrameObservation, params: MappingParams) -> Optional[Keyframe]:
    """Feed one frame; returns a Keyframe when the path-distance trigger fires."""
    pose = obs.pose
    if len(obs.points_cam):
        R = pose.rotation_matrix()
        state.chunks.append(R @ obs.points_cam.T + pose.translation[:, None])

    if state.last_position is not None:
        step = float(np.linalg.norm(pose.translation - state.last_position))
        state.total_path_distance += step
        state.path_distance_since_keyframe += step
    state.last_position = pose.translation.copy()

    if not state.warmup_done:
        fire = state.total_path_distance > params.warmup_distance
    else:
        fire = state.path_distance_since_keyframe > params.s
    if not fire:
        return None

    cloud = state._cloud()
    cam = _to_camera(cloud, pose)
    keyframe = Keyframe(state.keyframe_count, pose, np.compress(_within(cam, params.r_k), cam, axis=1).T)
    state.chunks = [np.compress(_within(cam, params.r_a), cloud, axis=1)]

    state.warmup_done = True
    state.keyframe_count += 1
    state.path_distance_since_keyframe = 0.0
    return keyframe


def generate_keyframes(observations, params: MappingParams) -> list[Keyframe]:
    """Run the accumulator over an iterable of FrameObservation."""
    state = AccumulationState()
    keyframes = []
    for obs in observations:
        kf = advance_frame(state, obs, params)
        if kf is not None:
            keyframes.append(kf)
    return keyframes
