"""Cart Context: an m x n birds-eye grid of maximum height above ground.

Rows run along the camera's forward axis (z), columns along its right axis
(x). The grid origin is the (-r_lo, -r_la) corner, so row 0 is furthest
behind the camera and column 0 furthest to its left. With this layout a
180 degree yaw of the cloud reverses both index axes, which is exactly
what :func:`double_flip` does.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .mapping import Keyframe, MappingParams

# slack on the coverage checks; the published defaults (r_k = 35.35 vs
# sqrt(25^2 + 25^2) = 35.3553) are rounded to the centimetre
VALIDITY_TOLERANCE = 0.01


@dataclass(frozen=True)
class DescriptorParams:
    h_c: float
    r_lo: float = 25.0
    r_la: float = 25.0
    m: int = 25
    n: int = 25

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise ValueError("m and n must be >= 1")
        if not (self.r_lo > 0 and self.r_la > 0):
            raise ValueError("r_lo and r_la must be positive")
        if not math.isfinite(self.h_c):
            raise ValueError("h_c must be finite")

    def check_against(self, mapping: MappingParams) -> None:
        """Raise ValueError if the keyframe cloud cannot cover the grid."""
        if mapping.r_d + VALIDITY_TOLERANCE < self.r_lo:
            raise ValueError(f"r_d={mapping.r_d} must be >= r_lo={self.r_lo}")
        need = math.hypot(self.r_lo, self.r_la)
        if mapping.r_k + VALIDITY_TOLERANCE < need:
            raise ValueError(f"r_k={mapping.r_k} must be >= sqrt(r_lo^2 + r_la^2)={need:.4f}")


@dataclass
class CartContext:
    grid: np.ndarray
    params: DescriptorParams

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=np.float64)
        if self.grid.shape != (self.params.m, self.params.n):
            raise ValueError(f"grid shape {self.grid.shape} != ({self.params.m}, {self.params.n})")

    @property
    def shape(self):
        return self.grid.shape


def bin_of(point, params: DescriptorParams) -> Optional[tuple[int, int]]:
    x, _, z = (float(c) for c in point)
    if abs(z) >= params.r_lo or abs(x) >= params.r_la:
        return None
    row = math.floor((z + params.r_lo) * (params.m / (2.0 * params.r_lo)))
    col = math.floor((x + params.r_la) * (params.n / (2.0 * params.r_la)))
    return min(max(row, 0), params.m - 1), min(max(col, 0), params.n - 1)


def describe_points(points_cam: np.ndarray, params: DescriptorParams) -> np.ndarray:
    """Vectorised binning; returns the raw (m, n) grid."""
    pts = np.asarray(points_cam, dtype=np.float64).reshape(-1, 3)
    x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
    keep = (np.abs(z) < params.r_lo) & (np.abs(x) < params.r_la) & (y <= params.h_c)
    x, z = x[keep], z[keep]
    h = params.h_c - y[keep]
    rows = ((z + params.r_lo) * (params.m / (2.0 * params.r_lo))).astype(np.intp)
    cols = ((x + params.r_la) * (params.n / (2.0 * params.r_la))).astype(np.intp)
    # operands are non-negative inside the range check, so truncation == floor
    np.minimum(rows, params.m - 1, out=rows)
    np.minimum(cols, params.n - 1, out=cols)
    grid = np.zeros(params.m * params.n)
    np.maximum.at(grid, rows * params.n + cols, h)
    return grid.reshape(params.m, params.n)


def describe(kf, params: DescriptorParams) -> CartContext:
    """Build the descriptor of a Keyframe (or a bare (N, 3) camera-frame cloud)."""
    points = kf.points_cam if isinstance(kf, Keyframe) else kf
    return CartContext(describe_points(points, params), params)


def double_flip(d: CartContext) -> CartContext:
    return CartContext(d.grid[::-1, ::-1].copy(), d.params)
