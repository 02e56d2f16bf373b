"""Sequence matching over the streaming similar/opposing distance matrices.

Each query contributes one column to ``sim`` (original descriptor) and one
to ``opp`` (double-flipped descriptor). A revisit in the same direction
shows up as a low-cost line of positive slope in ``sim``; a revisit in the
opposite direction as a line of negative slope in ``opp``.

Candidate lines over the last ``w`` columns are parameterised by their
centre reference ``r`` and slope magnitude ``v``::

    j(t) = r + round(sign * v * (t - t_c))        round = floor(x + 0.5)

Lines leaving the matrix are rejected, so all sums cover exactly ``w``
cells. Sums accumulate column by column in window order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .descriptor import CartContext
from .distance import DistanceColumnPair

SIMILAR = "similar"
OPPOSING = "opposing"
MATCHERS = ("DD", "SM", "NN", "RK+NN")


class InsufficientReferences(ValueError):
    """No candidate line fits inside the reference range."""


@dataclass(frozen=True)
class MatchingParams:
    w: int = 75
    v_min: float = 0.6
    v_max: float = 1.4
    n_v: int = 9
    exclusion_half_width: Optional[int] = None  # None -> w

    def __post_init__(self):
        if self.w < 1 or self.w % 2 == 0:
            raise ValueError(f"w must be odd and >= 1, got {self.w}")
        if not (0 < self.v_min <= self.v_max):
            raise ValueError("need 0 < v_min <= v_max")
        if self.n_v < 1:
            raise ValueError("n_v must be >= 1")
        if self.exclusion_half_width is not None and self.exclusion_half_width < 0:
            raise ValueError("exclusion_half_width must be >= 0")

    @property
    def exclusion(self) -> int:
        return self.w if self.exclusion_half_width is None else self.exclusion_half_width

    @property
    def half(self) -> int:
        return (self.w - 1) // 2

    def slopes(self) -> np.ndarray:
        if self.n_v == 1:
            return np.array([self.v_min])
        return np.linspace(self.v_min, self.v_max, self.n_v)

    def line_offsets(self, slope_sign: int) -> np.ndarray:
        """(n_v, w) integer row offsets of every slope relative to the centre."""
        dt = np.arange(-self.half, self.half + 1, dtype=np.float64)
        return np.floor(slope_sign * self.slopes()[:, None] * dt[None, :] + 0.5).astype(np.intp)


@dataclass
class MatchResult:
    query_index: int
    ref_index: int
    score: float
    viewpoint: str
    line_sum: float


@dataclass
class LineSearch:
    ref_index: int
    best_sum: float
    second_best_sum: Optional[float]
    slope_index: int = 0

    @property
    def score(self) -> float:
        return ratio_score(self.best_sum, self.second_best_sum)


def ratio_score(best: float, second: Optional[float]) -> float:
    if second is None:
        return 0.0
    if second > 0:
        return best / second
    return 1.0  # two perfect lines: ambiguous


class DistanceMatrices:
    """Append-only (references x queries) pair of distance matrices."""

    def __init__(self, ref_count: int, capacity: int = 64):
        if ref_count < 1:
            raise ValueError("need at least one reference")
        self.ref_count = ref_count
        self._sim = np.empty((ref_count, capacity))
        self._opp = np.empty((ref_count, capacity))
        self._n = 0

    @classmethod
    def from_arrays(cls, sim, opp) -> "DistanceMatrices":
        sim = np.asarray(sim, dtype=np.float64)
        opp = np.asarray(opp, dtype=np.float64)
        if sim.shape != opp.shape or sim.ndim != 2:
            raise ValueError("sim and opp must be equal-shape 2D arrays")
        D = cls(sim.shape[0], max(sim.shape[1], 1))
        D._sim[:, : sim.shape[1]] = sim
        D._opp[:, : sim.shape[1]] = opp
        D._n = sim.shape[1]
        return D

    def __len__(self):
        return self._n

    @property
    def shape(self):
        return (self.ref_count, self._n)

    @property
    def query_count(self) -> int:
        return self._n

    def _view(self, arr, stop=None):
        v = arr[:, : self._n if stop is None else stop]
        v.flags.writeable = False
        return v

    @property
    def sim(self) -> np.ndarray:
        return self._view(self._sim)

    @property
    def opp(self) -> np.ndarray:
        return self._view(self._opp)

    def upto(self, stop: int) -> "DistanceMatrices":
        """Read-only snapshot holding the first ``stop`` query columns."""
        snap = DistanceMatrices.__new__(DistanceMatrices)
        snap.ref_count = self.ref_count
        snap._sim = self._view(self._sim, stop)
        snap._opp = self._view(self._opp, stop)
        snap._n = min(stop, self._n)
        return snap

    def scaled(self, c: float) -> "DistanceMatrices":
        return DistanceMatrices.from_arrays(self.sim * c, self.opp * c)

    def _grow(self):
        cap = self._sim.shape[1] * 2
        for name in ("_sim", "_opp"):
            old = getattr(self, name)
            new = np.empty((self.ref_count, cap))
            new[:, : self._n] = old[:, : self._n]
            setattr(self, name, new)


def append_query_columns(D: DistanceMatrices, cols: DistanceColumnPair) -> DistanceMatrices:
    if len(cols) != D.ref_count:
        raise ValueError(f"column length {len(cols)} != reference count {D.ref_count}")
    if D._n == D._sim.shape[1]:
        D._grow()
    D._sim[:, D._n] = cols.sim
    D._opp[:, D._n] = cols.opp
    D._n += 1
    return D


def _window_sums(D: np.ndarray, slope_sign: int, params: MatchingParams) -> np.ndarray:
    """(n_v, N) line sums over the last w columns; +inf where the line leaves D."""
    n_ref, n_q = D.shape
    if n_q < params.w:
        raise ValueError(f"need at least w={params.w} query columns, have {n_q}")
    offsets = params.line_offsets(slope_sign)
    pad_lo = max(0, -int(offsets.min()))
    pad_hi = max(0, int(offsets.max()))
    # window transposed to (w, rows) and padded with +inf so out-of-range
    # lines sum to inf instead of needing per-slope bounds
    padded = np.full((params.w, pad_lo + n_ref + pad_hi), np.inf)
    padded[:, pad_lo : pad_lo + n_ref] = D[:, n_q - params.w :].T
    starts = offsets + pad_lo  # (n_v, w)
    windows = sliding_window_view(padded, n_ref, axis=1)  # (w, positions, N) view
    sums = np.zeros((len(offsets), n_ref))
    for t in range(params.w):
        sums += windows[t, starts[:, t]]
    return sums


def sequence_best_line(D, slope_sign: int, params: MatchingParams) -> LineSearch:
    """Lowest-sum line through the last ``w`` columns of ``D``."""
    D = np.asarray(D, dtype=np.float64)
    if slope_sign not in (1, -1):
        raise ValueError("slope_sign must be +1 or -1")
    sums = _window_sums(D, slope_sign, params)
    per_ref = sums.min(axis=0)
    if not np.isfinite(per_ref).any():
        raise InsufficientReferences(
            f"{D.shape[0]} references cannot hold a {params.w}-long line at slope {params.v_min}"
        )
    ref = int(np.argmin(per_ref))  # first minimum: smallest reference index
    slope_index = int(np.argmin(sums[:, ref]))
    best = float(per_ref[ref])
    outside = per_ref.copy()
    e = params.exclusion
    outside[max(0, ref - e) : ref + e + 1] = np.inf
    second = float(outside.min()) if np.isfinite(outside).any() else None
    return LineSearch(ref, best, second, slope_index)


def _window_center(D: DistanceMatrices, params: MatchingParams) -> int:
    return D.query_count - 1 - params.half


def dd_match(D: DistanceMatrices, params: MatchingParams) -> MatchResult:
    """Double distance matrix matching: +slope in sim vs -slope in opp."""
    sim = sequence_best_line(D.sim, +1, params)
    opp = sequence_best_line(D.opp, -1, params)
    win, vp = (sim, SIMILAR) if sim.best_sum <= opp.best_sum else (opp, OPPOSING)
    return MatchResult(_window_center(D, params), win.ref_index, win.score, vp, win.best_sum)


def sm_match(D: DistanceMatrices, params: MatchingParams) -> MatchResult:
    """Single-matrix ablation: both slope signs over min(sim, opp)."""
    M = np.minimum(D.sim, D.opp)
    pos = sequence_best_line(M, +1, params)
    neg = sequence_best_line(M, -1, params)
    win, vp = (pos, SIMILAR) if pos.best_sum <= neg.best_sum else (neg, OPPOSING)
    return MatchResult(_window_center(D, params), win.ref_index, win.score, vp, win.best_sum)


def nn_match(cols: DistanceColumnPair, ref_indices: Optional[Sequence[int]] = None) -> MatchResult:
    """Global minimum over both columns; the score is that distance.

    ``ref_indices`` maps column positions back to database indices when the
    columns only cover a candidate subset.
    """
    if len(cols) == 0:
        raise ValueError("empty distance columns")
    i_sim = int(np.argmin(cols.sim))
    i_opp = int(np.argmin(cols.opp))
    if cols.sim[i_sim] <= cols.opp[i_opp]:
        idx, score, vp = i_sim, float(cols.sim[i_sim]), SIMILAR
    else:
        idx, score, vp = i_opp, float(cols.opp[i_opp]), OPPOSING
    if ref_indices is not None:
        idx = int(ref_indices[idx])
    return MatchResult(cols.query_index, idx, score, vp, score)


def retrieval_key(d) -> np.ndarray:
    grid = d.grid if isinstance(d, CartContext) else np.asarray(d, dtype=np.float64)
    return grid.mean(axis=1)


def rk_candidates(query, ref_keys, top_k: int) -> list[int]:
    """Exact top-k references by retrieval-key distance (key or reversed key)."""
    if top_k < 1:
        raise ValueError("top_k must be >= 1")
    keys = np.asarray(ref_keys, dtype=np.float64)
    if keys.ndim != 2 or len(keys) == 0:
        raise ValueError("reference key set is empty")
    kq = retrieval_key(query)
    dist = np.minimum(np.linalg.norm(keys - kq, axis=1), np.linalg.norm(keys - kq[::-1], axis=1))
    order = np.lexsort((np.arange(len(dist)), dist))
    return [int(i) for i in order[:top_k]]
