"""Descriptor distances.

``vd_distance`` is the variable-offset distance: the minimum, over a set of
integer (longitudinal, lateral) shifts, of the cosine distance between the
overlapping parts of the two grids. ``sc_distance`` and ``cd_distance`` are
the circular-alignment variants used for ablations.

For retrieval against a whole database, :class:`ReferenceBank` keeps the
references as one contiguous (N, m*n) block and evaluates every shift of
the query (and of its double flip) with a single matrix product per chunk.
The overlap of shift (k, l) is expressed as a zero-padded copy of the query
laid over the reference grid, so that dot products become plain inner
products with the reference rows; reference patch norms for every shift are
computed once when the bank is built.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .descriptor import CartContext

METRICS = ("VD", "SC", "CD")


def _grid(d) -> np.ndarray:
    return d.grid if isinstance(d, CartContext) else np.asarray(d, dtype=np.float64)


@dataclass(frozen=True)
class ShiftSet:
    s_lo: tuple = (-2, -1, 0, 1, 2)
    s_la: tuple = tuple(range(-5, 6))

    def __post_init__(self):
        object.__setattr__(self, "s_lo", tuple(sorted({int(k) for k in self.s_lo})))
        object.__setattr__(self, "s_la", tuple(sorted({int(l) for l in self.s_la})))
        if 0 not in self.s_lo or 0 not in self.s_la:
            raise ValueError("shift sets must contain 0")

    def validate(self, m: int, n: int) -> None:
        if max(abs(k) for k in self.s_lo) >= m or max(abs(l) for l in self.s_la) >= n:
            raise ValueError(f"shift magnitude must be smaller than the grid ({m}x{n})")

    def pairs(self) -> list[tuple[int, int]]:
        return list(itertools.product(self.s_lo, self.s_la))

    @property
    def symmetric(self) -> bool:
        return self.s_lo == tuple(sorted(-k for k in self.s_lo)) and self.s_la == tuple(
            sorted(-l for l in self.s_la)
        )


@dataclass
class DistanceColumnPair:
    sim: np.ndarray
    opp: np.ndarray
    query_index: int = -1

    def __post_init__(self):
        self.sim = np.asarray(self.sim, dtype=np.float64).reshape(-1)
        self.opp = np.asarray(self.opp, dtype=np.float64).reshape(-1)
        if self.sim.shape != self.opp.shape:
            raise ValueError("sim and opp columns differ in length")

    def __len__(self):
        return len(self.sim)

    def scaled(self, c: float) -> "DistanceColumnPair":
        return DistanceColumnPair(self.sim * c, self.opp * c, self.query_index)


def _cosine(dot, sq_a, sq_b):
    # takes squared norms: sqrt(a*a) is exact, so identical inputs give exactly 0
    denom = np.sqrt(sq_a * sq_b)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(denom > 0, 1.0 - dot / denom, 1.0)
    return np.clip(out, 0.0, 1.0)


def flat_cosine_distance(A, B) -> float:
    """Cosine distance of the flattened matrices; 1 if either is all zero."""
    a = np.asarray(A, dtype=np.float64).ravel()
    b = np.asarray(B, dtype=np.float64).ravel()
    if np.shape(A) != np.shape(B):
        raise ValueError(f"shape mismatch {np.shape(A)} vs {np.shape(B)}")
    return float(_cosine(np.dot(a, b), np.dot(a, a), np.dot(b, b)))


def _overlap(k: int, l: int, m: int, n: int):
    # 0-based starts for query and reference, plus patch height/width
    return max(0, -k), max(0, -l), max(0, k), max(0, l), m - abs(k), n - abs(l)


def vd_distance(Q, R, shifts: ShiftSet = ShiftSet()) -> float:
    q, r = _grid(Q), _grid(R)
    if q.shape != r.shape:
        raise ValueError(f"shape mismatch {q.shape} vs {r.shape}")
    m, n = q.shape
    shifts.validate(m, n)
    best = 1.0
    for k, l in shifts.pairs():
        iq, jq, ir, jr, h, w = _overlap(k, l, m, n)
        qs = q[iq : iq + h, jq : jq + w]
        rs = r[ir : ir + h, jr : jr + w]
        d = _cosine(np.sum(qs * rs), np.sum(qs * qs), np.sum(rs * rs))
        best = min(best, float(d))
    return best


# ------------------------------------------------------- circular alignment


def _best_circular_shift(key_q: np.ndarray, key_r: np.ndarray) -> int:
    n = len(key_q)
    corr = [float(np.dot(key_q, np.roll(key_r, -s))) for s in range(n)]
    return int(np.argmax(corr))


def aligned_reference(Q, R) -> np.ndarray:
    """R circularly shifted over columns so its column-sum key best matches Q's."""
    q, r = _grid(Q), _grid(R)
    if q.shape != r.shape:
        raise ValueError(f"shape mismatch {q.shape} vs {r.shape}")
    s = _best_circular_shift(q.sum(axis=0), r.sum(axis=0))
    return np.roll(r, -s, axis=1)


def _columnwise_cosine(q: np.ndarray, r: np.ndarray) -> np.ndarray:
    dot = np.sum(q * r, axis=-2)
    nq = np.sum(q * q, axis=-2)
    nr = np.sum(r * r, axis=-2)
    d = _cosine(dot, nq, nr)
    both_empty = (nq == 0) & (nr == 0)
    return np.where(both_empty, 0.0, d)


def sc_distance(Q, R) -> float:
    q = _grid(Q)
    r = aligned_reference(Q, R)
    return float(np.mean(_columnwise_cosine(q, r)))


def cd_distance(Q, R) -> float:
    return flat_cosine_distance(_grid(Q), aligned_reference(Q, R))


# ------------------------------------------------------------ batched bank


class ReferenceBank:
    """Contiguous reference store with per-shift patch norms precomputed.

    Results for a given reference never depend on how many workers are
    used: chunk boundaries are fixed by ``chunk_size`` alone.
    """

    def __init__(self, grids, shifts: ShiftSet = ShiftSet(), chunk_size: int = 512):
        if isinstance(grids, np.ndarray):
            stack = np.asarray(grids, dtype=np.float64)
        else:
            stack = np.stack([_grid(g) for g in grids]).astype(np.float64)
        if stack.ndim != 3 or len(stack) == 0:
            raise ValueError("reference bank needs a non-empty (N, m, n) stack")
        self.count, self.m, self.n = stack.shape
        shifts.validate(self.m, self.n)
        self.shifts = shifts
        self.chunk_size = int(chunk_size)
        self.grids3 = stack
        self.flat = np.ascontiguousarray(stack.reshape(self.count, -1))
        self._pairs = shifts.pairs()
        self._masks = self._reference_masks()
        self.ref_sq = (self.flat * self.flat) @ self._masks.T
        self._keys = stack.sum(axis=1)  # (N, n) column sums for SC/CD

    def __len__(self):
        return self.count

    def _reference_masks(self) -> np.ndarray:
        m, n = self.m, self.n
        masks = np.zeros((len(self._pairs), m, n))
        for s, (k, l) in enumerate(self._pairs):
            _, _, ir, jr, h, w = _overlap(k, l, m, n)
            masks[s, ir : ir + h, jr : jr + w] = 1.0
        return masks.reshape(len(self._pairs), -1)

    def _query_operator(self, q: np.ndarray) -> np.ndarray:
        # column s holds the query patch for shift s placed over the reference grid
        m, n = self.m, self.n
        op = np.zeros((len(self._pairs), m, n))
        for s, (k, l) in enumerate(self._pairs):
            iq, jq, ir, jr, h, w = _overlap(k, l, m, n)
            op[s, ir : ir + h, jr : jr + w] = q[iq : iq + h, jq : jq + w]
        return op.reshape(len(self._pairs), -1)

    def _chunks(self):
        return [slice(i, min(i + self.chunk_size, self.count)) for i in range(0, self.count, self.chunk_size)]

    def _run(self, fn, workers: int) -> np.ndarray:
        chunks = self._chunks()
        if workers > 1 and len(chunks) > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                parts = list(pool.map(fn, chunks))
        else:
            parts = [fn(c) for c in chunks]
        return np.concatenate(parts, axis=0)

    def vd_columns(self, query, workers: int = 1) -> tuple[np.ndarray, np.ndarray]:
        q = _grid(query)
        ops = np.concatenate([self._query_operator(q), self._query_operator(q[::-1, ::-1])], axis=0)
        q_sq = np.sum(ops * ops, axis=1)
        ops_t = np.ascontiguousarray(ops.T)
        n_s = len(self._pairs)

        def chunk(sl):
            dots = self.flat[sl] @ ops_t
            rn = np.concatenate([self.ref_sq[sl], self.ref_sq[sl]], axis=1)
            d = _cosine(dots, rn, q_sq[None, :])
            return np.stack([d[:, :n_s].min(axis=1), d[:, n_s:].min(axis=1)], axis=1)

        out = self._run(chunk, workers)
        return out[:, 0], out[:, 1]

    def _aligned(self, q: np.ndarray, sl: slice) -> np.ndarray:
        n = self.n
        key_q = q.sum(axis=0)
        keys = self._keys[sl]
        roll_idx = (np.arange(n)[None, :] + np.arange(n)[:, None]) % n  # [s, j] -> (j + s) % n
        corr = np.einsum("csj,j->cs", keys[:, roll_idx], key_q)
        best = np.argmax(corr, axis=1)
        return np.take_along_axis(self.grids3[sl], roll_idx[best][:, None, :], axis=2)

    def circular_columns(self, query, metric: str, workers: int = 1) -> tuple[np.ndarray, np.ndarray]:
        q = _grid(query)
        variants = (q, q[::-1, ::-1].copy())

        def chunk(sl):
            cols = []
            for qv in variants:
                r = self._aligned(qv, sl)
                if metric == "SC":
                    cols.append(_columnwise_cosine(qv[None], r).mean(axis=1))
                else:
                    flat_r = r.reshape(len(r), -1)
                    qf = qv.ravel()
                    cols.append(_cosine(flat_r @ qf, np.sum(flat_r * flat_r, axis=1), qf @ qf))
            return np.stack(cols, axis=1)

        out = self._run(chunk, workers)
        return out[:, 0], out[:, 1]

    def columns(self, query, metric: str = "VD", query_index: int = -1, workers: int = 1) -> DistanceColumnPair:
        if metric == "VD":
            sim, opp = self.vd_columns(query, workers)
        elif metric in ("SC", "CD"):
            sim, opp = self.circular_columns(query, metric, workers)
        else:
            raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")
        return DistanceColumnPair(sim, opp, query_index)

    def subset(self, indices: Sequence[int]) -> "ReferenceBank":
        return ReferenceBank(self.grids3[np.asarray(indices, dtype=np.intp)], self.shifts, self.chunk_size)


def query_distance_columns(
    query,
    refs,
    shifts: ShiftSet = ShiftSet(),
    metric: str = "VD",
    query_index: int = -1,
    workers: int = 1,
) -> DistanceColumnPair:
    """Distances of ``query`` and its double flip against every reference."""
    if not isinstance(refs, ReferenceBank):
        refs = list(refs)
        if not refs:
            raise ValueError("reference list is empty")
        refs = ReferenceBank(refs, shifts)
    return refs.columns(query, metric, query_index, workers)
