"""End-to-end glue: keyframes -> descriptors -> distance columns -> matches.

Queries stream through one at a time. Sequence matchers (DD, SM) emit a
result for the centre of the last ``w`` queries, so the first and last
(w - 1) / 2 queries of a run never receive one.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .config import PipelineConfig
from .descriptor import CartContext, describe
from .distance import ReferenceBank
from .evaluation import auc, build_outcomes, mr100, pr_curve
from .io import FrameObservation, GroundTruthTrack, Pose, ReferenceDatabase
from .mapping import AccumulationState, advance_frame
from .matching import (
    DistanceMatrices,
    MatchResult,
    append_query_columns,
    dd_match,
    nn_match,
    retrieval_key,
    rk_candidates,
    sm_match,
)


@dataclass
class SequenceDescriptors:
    """Keyframe poses of one run with their descriptors and ground truth.

    Keyframe clouds are dropped once described.
    """

    poses: list
    descriptors: list
    positions: Optional[np.ndarray] = None  # (K, 2) ground truth, if known
    describe_seconds: list = field(default_factory=list)

    def __len__(self):
        return len(self.descriptors)

    def ground_truth(self) -> GroundTruthTrack:
        if self.positions is None:
            raise ValueError("sequence has no ground truth")
        return GroundTruthTrack(self.positions)


def observations(poses: Sequence[Pose], frames: dict) -> Iterable[FrameObservation]:
    empty = np.zeros((0, 3))
    for p in poses:
        yield FrameObservation(p, frames.get(p.frame_id, empty))


def describe_sequence(poses, frames, cfg: PipelineConfig, gt: Optional[GroundTruthTrack] = None) -> SequenceDescriptors:
    """Keyframe and describe a run. ``gt`` is indexed by frame_id."""
    params = cfg.mapping_params()
    dparams = cfg.descriptor_params()
    state = AccumulationState()
    kf_poses, descriptors, seconds = [], [], []
    for obs in observations(poses, frames):
        kf = advance_frame(state, obs, params)
        if kf is None:
            continue
        t0 = time.perf_counter()
        descriptors.append(describe(kf, dparams))
        seconds.append(time.perf_counter() - t0)
        kf_poses.append(kf.pose)
    positions = None
    if gt is not None:
        positions = np.array([gt[p.frame_id] for p in kf_poses]).reshape(-1, 2)
    return SequenceDescriptors(kf_poses, descriptors, positions, seconds)


def build_reference(seq: SequenceDescriptors, cfg: PipelineConfig) -> ReferenceDatabase:
    count = len(seq)
    flags = np.full(count, seq.positions is not None)
    pos = seq.positions if seq.positions is not None else np.zeros((count, 2))
    grids = np.stack([d.grid for d in seq.descriptors]) if count else np.zeros((0, cfg.m, cfg.n))
    ids = [p.frame_id for p in seq.poses]
    return ReferenceDatabase(cfg.m, cfg.n, cfg.r_lo, cfg.r_la, cfg.h_c, cfg.s, ids, grids, flags, pos)


class QueryRunner:
    """Streams query descriptors against a fixed reference bank."""

    def __init__(self, reference_grids, cfg: PipelineConfig):
        self.cfg = cfg
        self.bank = ReferenceBank(np.asarray(reference_grids, dtype=np.float64), cfg.shifts())
        self.params = cfg.matching_params()
        self.D = DistanceMatrices(len(self.bank))
        self.ref_keys = np.array([retrieval_key(g) for g in self.bank.grids3])
        self.match_seconds: list[float] = []
        self._next = 0

    def push(self, query: CartContext) -> Optional[MatchResult]:
        t0 = time.perf_counter()
        qi = self._next
        self._next += 1
        matcher = self.cfg.matcher
        result = None
        if matcher == "RK+NN":
            cand = rk_candidates(query, self.ref_keys, self.cfg.rk_top_k)
            cols = self.bank.subset(cand).columns(query, self.cfg.metric, qi, self.cfg.workers)
            result = nn_match(cols, cand)
        else:
            cols = self.bank.columns(query, self.cfg.metric, qi, self.cfg.workers)
            append_query_columns(self.D, cols)
            if matcher == "NN":
                result = nn_match(cols)
            elif self.D.query_count >= self.params.w:
                result = (dd_match if matcher == "DD" else sm_match)(self.D, self.params)
        self.match_seconds.append(time.perf_counter() - t0)
        return result


def run_queries(reference_grids, queries: Sequence[CartContext], cfg: PipelineConfig):
    """Returns (matches, runner); runner keeps the distance matrices and timings."""
    runner = QueryRunner(reference_grids, cfg)
    matches = []
    for q in queries:
        res = runner.push(q)
        if res is not None:
            matches.append(res)
    return matches, runner


def sequence_matches(D: DistanceMatrices, cfg: PipelineConfig, w: Optional[int] = None) -> list[MatchResult]:
    """Offline replay of a sequence matcher over stored matrices (any ``w``)."""
    cfg = cfg if w is None else cfg.replace(w=w)
    params = cfg.matching_params()
    match = dd_match if cfg.matcher == "DD" else sm_match
    out = []
    for stop in range(params.w, D.query_count + 1):
        out.append(match(D.upto(stop), params))
    return out


def evaluate(
    matches,
    query_track: GroundTruthTrack,
    ref_track: GroundTruthTrack,
    radii: Iterable[float],
    queries: Optional[slice] = None,
) -> dict:
    """{r_m: (PRCurve, mr100, auc)}, optionally over a slice of the queries."""
    outcomes = build_outcomes(matches, query_track, ref_track)
    if queries is not None:
        outcomes = outcomes[queries]
    report = {}
    for r_m in radii:
        curve = pr_curve(outcomes, ref_track, r_m)
        report[float(r_m)] = (curve, mr100(curve), auc(curve))
    return report


def sweep_w(D: DistanceMatrices, query_track, ref_track, cfg: PipelineConfig, ws: Sequence[int]) -> dict:
    """{w: report} with every w scored on the same queries.

    The common set is the queries that are window centres for the largest
    w, so a long window is not charged for the extra edge queries it cannot
    answer.
    """
    half = (max(ws) - 1) // 2
    common = slice(half, max(half, D.query_count - half))
    out = {}
    for w in ws:
        matches = sequence_matches(D, cfg, w=w) if D.query_count >= w else []
        out[w] = evaluate(matches, query_track, ref_track, cfg.r_m, common)
    return out


def format_summary(report: dict) -> str:
    lines = []
    for r_m, (_, mr, area) in report.items():
        tag = f"{r_m:g}"
        lines.append(f"mr100_{tag}={mr!r}")
        lines.append(f"auc_{tag}={area!r}")
    return "\n".join(lines) + "\n"
