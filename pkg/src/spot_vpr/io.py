"""Readers and writers for trajectories, point observations, ground truth and
reference databases.

All binary formats are little-endian. CSV files use '.' as the decimal mark
and are written with ``repr`` precision so floats survive a round trip.

Pose convention: rows store the *world-from-camera* transform, i.e. the
translation is the camera position in the world frame and the quaternion
``(qx, qy, qz, qw)`` rotates camera-frame vectors into the world frame.
Camera axes are x right, y down, z forward.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.spatial.transform import Rotation

TRAJECTORY_HEADER = ("frame_id", "t_sec", "tx", "ty", "tz", "qx", "qy", "qz", "qw")
TRAJECTORY_COMMENT = "# pose: world_from_camera; quaternion order x,y,z,w; camera x right, y down, z forward"
GROUND_TRUTH_HEADER = ("index", "east", "north")
MATCH_HEADER = ("query_idx", "ref_idx", "score", "viewpoint", "line_sum")

POINTS_MAGIC = b"SPOTPTS1"
DB_MAGIC = b"SPOTDB01"
DB_VERSION = 1

DEFAULT_STATIONARY_EPS = 0.05


class FormatError(ValueError):
    """Raised when a file does not follow its documented layout."""


class ParseError(FormatError):
    """Raised for a malformed CSV line; carries the 1-based line number."""

    def __init__(self, path, lineno: int, message: str):
        super().__init__(f"{path}:{lineno}: {message}")
        self.lineno = lineno


@dataclass
class Pose:
    frame_id: int
    t_sec: float
    translation: np.ndarray
    rotation: np.ndarray  # quaternion (x, y, z, w), world_from_camera

    def __post_init__(self):
        self.translation = np.asarray(self.translation, dtype=np.float64).reshape(3)
        q = np.asarray(self.rotation, dtype=np.float64).reshape(4)
        norm = np.linalg.norm(q)
        if not np.isfinite(norm) or norm == 0.0:
            raise ValueError(f"frame {self.frame_id}: degenerate quaternion")
        if abs(norm - 1.0) > 1e-6:
            q = q / norm
        self.rotation = q

    def rotation_matrix(self) -> np.ndarray:
        """3x3 world_from_camera rotation."""
        return Rotation.from_quat(self.rotation).as_matrix()

    def to_camera(self, points_world: np.ndarray) -> np.ndarray:
        points_world = np.asarray(points_world, dtype=np.float64).reshape(-1, 3)
        return (points_world - self.translation) @ self.rotation_matrix()

    def to_world(self, points_cam: np.ndarray) -> np.ndarray:
        points_cam = np.asarray(points_cam, dtype=np.float64).reshape(-1, 3)
        return points_cam @ self.rotation_matrix().T + self.translation


@dataclass
class FrameObservation:
    pose: Pose
    points_cam: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))

    def __post_init__(self):
        self.points_cam = np.asarray(self.points_cam, dtype=np.float64).reshape(-1, 3)


@dataclass
class GroundTruthTrack:
    """Dense, 0-indexed 2D (east, north) positions."""

    positions: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.float64).reshape(-1, 2)
        if not np.all(np.isfinite(self.positions)):
            raise ValueError("ground truth positions must be finite")

    def __len__(self):
        return len(self.positions)

    def __getitem__(self, idx):
        return self.positions[idx]


# ---------------------------------------------------------------- trajectory


def filter_stationary(poses: Sequence[Pose], stationary_eps: float = DEFAULT_STATIONARY_EPS) -> list[Pose]:
    """Drop poses that moved less than ``stationary_eps`` from the last kept pose."""
    kept: list[Pose] = []
    for pose in poses:
        if kept and np.linalg.norm(pose.translation - kept[-1].translation) < stationary_eps:
            continue
        kept.append(pose)
    return kept


def _data_lines(path: Path):
    with open(path, newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            yield lineno, stripped


def parse_trajectory(path, stationary_eps: float = DEFAULT_STATIONARY_EPS) -> list[Pose]:
    path = Path(path)
    poses: list[Pose] = []
    header_seen = False
    last_id = None
    for lineno, line in _data_lines(path):
        fields = [f.strip() for f in line.split(",")]
        if not header_seen:
            if tuple(fields) != TRAJECTORY_HEADER:
                raise ParseError(path, lineno, f"expected header {','.join(TRAJECTORY_HEADER)}")
            header_seen = True
            continue
        if len(fields) != len(TRAJECTORY_HEADER):
            raise ParseError(path, lineno, f"expected {len(TRAJECTORY_HEADER)} fields, got {len(fields)}")
        try:
            frame_id = int(fields[0])
            values = [float(f) for f in fields[1:]]
        except ValueError as exc:
            raise ParseError(path, lineno, str(exc)) from None
        if last_id is not None and frame_id <= last_id:
            raise FormatError(f"{path}:{lineno}: frame_id {frame_id} not greater than {last_id}")
        last_id = frame_id
        try:
            poses.append(Pose(frame_id, values[0], values[1:4], values[4:8]))
        except ValueError as exc:
            raise ParseError(path, lineno, str(exc)) from None
    if not header_seen:
        raise FormatError(f"{path}: missing header line")
    return filter_stationary(poses, stationary_eps)


def write_trajectory(path, poses: Iterable[Pose]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(TRAJECTORY_COMMENT + "\n")
        fh.write(",".join(TRAJECTORY_HEADER) + "\n")
        for p in poses:
            row = [str(int(p.frame_id)), repr(float(p.t_sec))]
            row += [repr(float(v)) for v in p.translation]
            row += [repr(float(v)) for v in p.rotation]
            fh.write(",".join(row) + "\n")


# -------------------------------------------------------------------- points


def write_points(path, frames: Mapping[int, np.ndarray]) -> None:
    with open(path, "wb") as fh:
        fh.write(POINTS_MAGIC)
        fh.write(struct.pack("<I", len(frames)))
        for frame_id in sorted(frames):
            pts = np.ascontiguousarray(np.asarray(frames[frame_id]).reshape(-1, 3), dtype="<f4")
            fh.write(struct.pack("<QI", int(frame_id), len(pts)))
            fh.write(pts.tobytes())


def parse_points(path) -> dict[int, np.ndarray]:
    """Read a points file into ``{frame_id: (n, 3) float64 array}``."""
    data = Path(path).read_bytes()
    if len(data) < 12 or data[:8] != POINTS_MAGIC:
        raise FormatError(f"{path}: bad magic {data[:8]!r}")
    (count,) = struct.unpack_from("<I", data, 8)
    offset = 12
    frames: dict[int, np.ndarray] = {}
    for _ in range(count):
        if offset + 12 > len(data):
            raise FormatError(f"{path}: truncated frame header at offset {offset}")
        frame_id, n = struct.unpack_from("<QI", data, offset)
        offset += 12
        nbytes = 12 * n
        if offset + nbytes > len(data):
            raise FormatError(f"{path}: truncated point block at offset {offset}")
        pts = np.frombuffer(data, dtype="<f4", count=3 * n, offset=offset).reshape(n, 3)
        frames[int(frame_id)] = pts.astype(np.float64)
        offset += nbytes
    if offset != len(data):
        raise FormatError(f"{path}: {len(data) - offset} trailing bytes at offset {offset}")
    return frames


# -------------------------------------------------------------- ground truth


def parse_ground_truth(path) -> GroundTruthTrack:
    path = Path(path)
    rows = []
    header_seen = False
    for lineno, line in _data_lines(path):
        fields = [f.strip() for f in line.split(",")]
        if not header_seen and tuple(fields) == GROUND_TRUTH_HEADER:
            header_seen = True
            continue
        if len(fields) != 3:
            raise ParseError(path, lineno, f"expected 3 fields, got {len(fields)}")
        try:
            idx, east, north = int(fields[0]), float(fields[1]), float(fields[2])
        except ValueError as exc:
            raise ParseError(path, lineno, str(exc)) from None
        if idx != len(rows):
            raise FormatError(f"{path}:{lineno}: index {idx} breaks dense ordering (expected {len(rows)})")
        rows.append((east, north))
    return GroundTruthTrack(np.array(rows, dtype=np.float64).reshape(-1, 2))


def write_ground_truth(path, track: GroundTruthTrack) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(GROUND_TRUTH_HEADER) + "\n")
        for i, (e, n) in enumerate(track.positions):
            fh.write(f"{i},{float(e)!r},{float(n)!r}\n")


# ---------------------------------------------------------- reference database


@dataclass
class ReferenceDatabase:
    """Persisted reference descriptors plus the parameters that produced them."""

    m: int
    n: int
    r_lo: float
    r_la: float
    h_c: float
    s: float
    keyframe_ids: np.ndarray
    grids: np.ndarray  # (count, m, n) float32
    gt_flags: np.ndarray  # (count,) bool
    gt_positions: np.ndarray  # (count, 2) float64

    def __post_init__(self):
        self.keyframe_ids = np.asarray(self.keyframe_ids, dtype=np.int64).reshape(-1)
        self.grids = np.asarray(self.grids, dtype=np.float32).reshape(-1, self.m, self.n)
        self.gt_flags = np.asarray(self.gt_flags, dtype=bool).reshape(-1)
        self.gt_positions = np.asarray(self.gt_positions, dtype=np.float64).reshape(-1, 2)
        count = len(self.keyframe_ids)
        if not (len(self.grids) == len(self.gt_flags) == len(self.gt_positions) == count):
            raise ValueError("reference database arrays disagree in length")

    def __len__(self):
        return len(self.keyframe_ids)

    def ground_truth(self) -> GroundTruthTrack:
        return GroundTruthTrack(self.gt_positions)


_DB_PARAMS = struct.Struct("<HHffff")
_DB_RECORD = struct.Struct("<IBdd")


def write_reference_db(path, db: ReferenceDatabase) -> None:
    with open(path, "wb") as fh:
        fh.write(DB_MAGIC)
        fh.write(struct.pack("<H", DB_VERSION))
        fh.write(_DB_PARAMS.pack(db.m, db.n, db.r_lo, db.r_la, db.h_c, db.s))
        fh.write(struct.pack("<I", len(db)))
        for i in range(len(db)):
            flag = bool(db.gt_flags[i])
            east, north = db.gt_positions[i] if flag else (0.0, 0.0)
            fh.write(_DB_RECORD.pack(int(db.keyframe_ids[i]), int(flag), east, north))
            fh.write(np.ascontiguousarray(db.grids[i], dtype="<f4").tobytes())


def parse_reference_db(path) -> ReferenceDatabase:
    data = Path(path).read_bytes()
    if len(data) < 10 or data[:8] != DB_MAGIC:
        raise FormatError(f"{path}: bad magic {data[:8]!r}")
    (version,) = struct.unpack_from("<H", data, 8)
    if version != DB_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    offset = 10
    if offset + _DB_PARAMS.size + 4 > len(data):
        raise FormatError(f"{path}: truncated parameter block at offset {offset}")
    m, n, r_lo, r_la, h_c, s = _DB_PARAMS.unpack_from(data, offset)
    offset += _DB_PARAMS.size
    (count,) = struct.unpack_from("<I", data, offset)
    offset += 4
    grid_bytes = 4 * m * n
    ids = np.empty(count, dtype=np.int64)
    flags = np.empty(count, dtype=bool)
    pos = np.zeros((count, 2))
    grids = np.empty((count, m, n), dtype=np.float32)
    for i in range(count):
        if offset + _DB_RECORD.size + grid_bytes > len(data):
            raise FormatError(f"{path}: truncated record {i} at offset {offset}")
        ids[i], flag, pos[i, 0], pos[i, 1] = _DB_RECORD.unpack_from(data, offset)
        flags[i] = bool(flag)
        offset += _DB_RECORD.size
        grids[i] = np.frombuffer(data, dtype="<f4", count=m * n, offset=offset).reshape(m, n)
        offset += grid_bytes
    if offset != len(data):
        raise FormatError(f"{path}: {len(data) - offset} trailing bytes at offset {offset}")
    return ReferenceDatabase(m, n, r_lo, r_la, h_c, s, ids, grids, flags, pos)


# ------------------------------------------------------------------- matches


def write_matches(path, matches) -> None:
    """Write MatchResult-like rows; floats use repr so output is byte-stable."""
    with open(path, "w", newline="") as fh:
        fh.write(",".join(MATCH_HEADER) + "\n")
        for mr in matches:
            vp = "sim" if mr.viewpoint == "similar" else "opp"
            fh.write(f"{mr.query_index},{mr.ref_index},{float(mr.score)!r},{vp},{float(mr.line_sum)!r}\n")


def parse_matches(path) -> list[dict]:
    path = Path(path)
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != MATCH_HEADER:
            raise FormatError(f"{path}: expected header {','.join(MATCH_HEADER)}")
        for lineno, fields in enumerate(reader, start=2):
            if not fields:
                continue
            if len(fields) != 5 or fields[3] not in ("sim", "opp"):
                raise ParseError(path, lineno, "malformed match row")
            try:
                rows.append(
                    dict(
                        query_idx=int(fields[0]),
                        ref_idx=int(fields[1]),
                        score=float(fields[2]),
                        viewpoint="similar" if fields[3] == "sim" else "opposing",
                        line_sum=float(fields[4]),
                    )
                )
            except ValueError as exc:
                raise ParseError(path, lineno, str(exc)) from None
    return rows


def write_pr_csv(path, curve) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("threshold,precision,recall\n")
        for thr, prec, rec in curve.plot_points():
            fh.write(f"{float(thr)!r},{float(prec)!r},{float(rec)!r}\n")
