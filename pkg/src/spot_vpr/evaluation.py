"""Query labelling, precision-recall curves, MR100 and AUC.

A query is *accepted* when it emitted a match whose score is at or below the
threshold. Accepted queries are TP/FP by the distance between query and
matched reference positions; the rest are FN if any reference lies within
the localisation radius, TN otherwise. Queries that never emitted a match
(sequence-window edges) are never accepted.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .io import GroundTruthTrack


@dataclass
class QueryOutcome:
    query_index: int
    query_pos: np.ndarray
    ref_index: Optional[int] = None
    score: Optional[float] = None
    matched_pos: Optional[np.ndarray] = None

    def __post_init__(self):
        self.query_pos = np.asarray(self.query_pos, dtype=np.float64).reshape(2)
        if (self.ref_index is None) != (self.score is None):
            raise ValueError("ref_index and score must both be set or both be None")
        if (self.ref_index is None) != (self.matched_pos is None):
            raise ValueError("matched_pos must be present iff a match is present")
        if self.matched_pos is not None:
            self.matched_pos = np.asarray(self.matched_pos, dtype=np.float64).reshape(2)

    @property
    def has_match(self) -> bool:
        return self.ref_index is not None


class Counts(NamedTuple):
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 1.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0


@dataclass
class PRCurve:
    points: list = field(default_factory=list)  # (threshold, precision, recall)
    r_m: float = 15.0

    # conventional start of every PR curve: nothing accepted, precision 1
    ENDPOINT = (float("nan"), 1.0, 0.0)

    def plot_points(self) -> list:
        """Curve points, or the lone (-, 1, 0) endpoint when nothing was emitted."""
        return list(self.points) if self.points else [self.ENDPOINT]

    @property
    def precision(self) -> np.ndarray:
        return np.array([p for _, p, _ in self.points])

    @property
    def recall(self) -> np.ndarray:
        return np.array([r for _, _, r in self.points])


def build_outcomes(matches, query_track: GroundTruthTrack, ref_track: GroundTruthTrack) -> list[QueryOutcome]:
    """One outcome per query position; ``matches`` are MatchResult-like."""
    by_query = {m.query_index: m for m in matches}
    out = []
    for i, pos in enumerate(query_track.positions):
        m = by_query.get(i)
        if m is None:
            out.append(QueryOutcome(i, pos))
        else:
            out.append(QueryOutcome(i, pos, m.ref_index, float(m.score), ref_track[m.ref_index]))
    return out


def _arrays(outcomes: Sequence[QueryOutcome], ref_track: GroundTruthTrack, r_m: float):
    if r_m <= 0:
        raise ValueError("r_m must be positive")
    q = np.array([o.query_pos for o in outcomes]).reshape(-1, 2)
    has = np.array([o.has_match for o in outcomes], dtype=bool)
    scores = np.array([o.score if o.has_match else np.inf for o in outcomes], dtype=np.float64)
    err = np.array(
        [np.linalg.norm(o.query_pos - o.matched_pos) if o.has_match else np.inf for o in outcomes]
    )
    correct = has & (err <= r_m)
    if len(ref_track):
        nearest, _ = cKDTree(ref_track.positions).query(q, k=1) if len(q) else (np.zeros(0), None)
        matchable = nearest <= r_m
    else:
        matchable = np.zeros(len(q), dtype=bool)
    return scores, correct, matchable


def _count(scores, correct, matchable, threshold) -> Counts:
    accepted = scores <= threshold
    tp = int(np.sum(accepted & correct))
    fp = int(np.sum(accepted & ~correct))
    fn = int(np.sum(~accepted & matchable))
    tn = int(np.sum(~accepted & ~matchable))
    return Counts(tp, fp, fn, tn)


def label_queries(outcomes, ref_track: GroundTruthTrack, threshold: float, r_m: float) -> Counts:
    return _count(*_arrays(outcomes, ref_track, r_m), threshold)


def pr_curve(outcomes, ref_track: GroundTruthTrack, r_m: float) -> PRCurve:
    """Sweep the threshold over every distinct emitted score."""
    if len(outcomes) == 0:
        raise ValueError("need at least one outcome")
    scores, correct, matchable = _arrays(outcomes, ref_track, r_m)
    thresholds = np.unique(scores[np.isfinite(scores)])
    points = []
    for thr in thresholds:
        c = _count(scores, correct, matchable, thr)
        points.append((float(thr), c.precision, c.recall))
    return PRCurve(points, r_m)


def mr100(curve: PRCurve) -> float:
    """Maximum recall over curve points with precision exactly 1."""
    rec = [r for _, p, r in curve.points if p == 1.0]
    return max(rec) if rec else 0.0


def auc(curve: PRCurve) -> float:
    """Trapezoidal area under precision(recall), held flat back to recall 0."""
    if not curve.points:
        return 0.0
    pts = sorted(curve.points, key=lambda p: (p[2], p[0]))
    rec = np.array([p[2] for p in pts])
    prec = np.array([p[1] for p in pts])
    rec = np.concatenate([[0.0], rec])
    prec = np.concatenate([[prec[0]], prec])
    return float(np.sum(np.diff(rec) * (prec[1:] + prec[:-1]) / 2.0))


def best_precision_one_threshold(curve: PRCurve) -> Optional[float]:
    """Threshold realising MR100, or None if no point has precision 1."""
    best = None
    for thr, p, r in curve.points:
        if p == 1.0 and (best is None or r > best[1]):
            best = (thr, r)
    return None if best is None else best[0]
