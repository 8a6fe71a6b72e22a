"""Motion estimation by switching over candidate displacements.

Each point of a coarse grid runs its own switching mixer whose experts are
integer displacements. An expert's loss is the mean squared difference
between a disk around the point in the current frame and the same disk moved
back by the displacement in the previous frame.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from ..errors import InvalidArgument
from ..losses import default_eta, squared
from ..switching import SwitchingState, switching_init

PATCH_RADIUS = 33
RING_RADII = (1, 2, 4, 8)


def ring_candidates(radii=RING_RADII) -> list[tuple[int, int]]:
    """Union over radii ``r`` of ``4r`` directions, rounded to pixels and deduplicated."""
    out: list[tuple[int, int]] = []
    seen = set()
    for r in radii:
        for k in range(4 * r):
            a = 2.0 * math.pi * k / (4 * r)
            d = (int(np.rint(r * math.cos(a))), int(np.rint(r * math.sin(a))))
            if d not in seen:
                seen.add(d)
                out.append(d)
    return out


def default_candidates() -> list[tuple[int, int]]:
    """Ring candidates plus the zero displacement."""
    return [(0, 0)] + ring_candidates()


def candidate_order(candidates) -> list[int]:
    """Tie-break order: smallest magnitude first, then lexicographic."""
    return sorted(range(len(candidates)),
                  key=lambda i: (candidates[i][0] ** 2 + candidates[i][1] ** 2, tuple(candidates[i])))


def disk_mask(radius: int) -> np.ndarray:
    r = np.arange(-radius, radius + 1)
    return (r[None, :] ** 2 + r[:, None] ** 2 <= radius * radius).astype(float)


def grid_points(height: int, width: int, stride: int) -> tuple[np.ndarray, np.ndarray]:
    return np.arange(0, height, stride), np.arange(0, width, stride)


def shifted(frame: np.ndarray, d: tuple[int, int]) -> np.ndarray:
    """``out[y, x] = frame[clamp(y - dy), clamp(x - dx)]``."""
    h, w = frame.shape
    ys = np.clip(np.arange(h) - d[1], 0, h - 1)
    xs = np.clip(np.arange(w) - d[0], 0, w - 1)
    return frame[np.ix_(ys, xs)]


def matching_losses(prev: np.ndarray, cur: np.ndarray, candidates, rows, cols,
                    radius: int = PATCH_RADIUS) -> np.ndarray:
    """Disk-mean squared matching error, shape ``(len(rows), len(cols), m)``."""
    mask = disk_mask(radius)
    mask /= mask.sum()
    diffs = np.stack([(cur - shifted(prev, d)) ** 2 for d in candidates])
    padded = np.pad(diffs, ((0, 0), (radius, radius), (radius, radius)), mode="edge")
    means = fftconvolve(padded, mask[None], mode="valid", axes=(1, 2))
    out = means[:, rows][:, :, cols]
    return np.maximum(np.moveaxis(out, 0, -1), 0.0)


@dataclass
class MotionField:
    vectors: np.ndarray   # (H, W, 2) as (dx, dy) in pixels per frame
    stride: int

    @property
    def shape(self) -> tuple[int, int]:
        return self.vectors.shape[:2]

    def sample(self, x: float, y: float) -> np.ndarray:
        """Bilinear read at a real-valued location, clamped to the frame."""
        h, w = self.shape
        x = min(max(float(x), 0.0), w - 1.0)
        y = min(max(float(y), 0.0), h - 1.0)
        x0, y0 = int(math.floor(x)), int(math.floor(y))
        x1, y1 = min(x0 + 1, w - 1), min(y0 + 1, h - 1)
        fx, fy = x - x0, y - y0
        v = self.vectors
        top = (1 - fx) * v[y0, x0] + fx * v[y0, x1]
        bot = (1 - fx) * v[y1, x0] + fx * v[y1, x1]
        return (1 - fy) * top + fy * bot


def interpolate_grid(grid: np.ndarray, rows: np.ndarray, cols: np.ndarray,
                     height: int, width: int) -> np.ndarray:
    """Bilinear fill of an ``(len(rows), len(cols), 2)`` grid onto every pixel."""
    def axis_weights(coords, n):
        idx = np.clip(np.searchsorted(coords, np.arange(n), side="right") - 1, 0, len(coords) - 1)
        nxt = np.minimum(idx + 1, len(coords) - 1)
        span = np.where(nxt > idx, coords[nxt] - coords[idx], 1)
        f = np.clip((np.arange(n) - coords[idx]) / span, 0.0, 1.0)
        return idx, nxt, f

    yi, yn, fy = axis_weights(rows, height)
    xi, xn, fx = axis_weights(cols, width)
    fx = fx[None, :, None]
    top = (1 - fx) * grid[yi][:, xi] + fx * grid[yi][:, xn]
    bot = (1 - fx) * grid[yn][:, xi] + fx * grid[yn][:, xn]
    fy = fy[:, None, None]
    return (1 - fy) * top + fy * bot


class MotionEstimator:
    """Online estimator: feed consecutive frame pairs, read the current field."""

    def __init__(self, height: int, width: int, stride: int = 8, candidates=None,
                 value_max: float = 1.0, radius: int = PATCH_RADIUS):
        min_side = 2 * radius + 1 + 2 * max(RING_RADII)
        if height < min_side or width < min_side:
            raise InvalidArgument(f"frames must be at least {min_side}x{min_side} for radius-{radius} patches")
        if stride < 1:
            raise InvalidArgument("stride must be >= 1")
        if not value_max > 0:
            raise InvalidArgument("value_max must be positive")
        self.height, self.width, self.stride, self.radius = height, width, stride, radius
        self.candidates = list(candidates or default_candidates())
        self.order = candidate_order(self.candidates)
        self.eta = default_eta(squared(0.0, 0.0, value_max))
        self.rows, self.cols = grid_points(height, width, stride)
        m = len(self.candidates)
        self.states = [[switching_init(m, self.eta) for _ in self.cols] for _ in self.rows]

    def update(self, prev: np.ndarray, cur: np.ndarray) -> None:
        if prev.shape != (self.height, self.width) or cur.shape != prev.shape:
            raise InvalidArgument("frame shape does not match the estimator")
        L = matching_losses(prev, cur, self.candidates, self.rows, self.cols, self.radius)
        for i, row in enumerate(self.states):
            for j, st in enumerate(row):
                st.update(L[i, j])

    def _choose(self, st: SwitchingState) -> tuple[int, int]:
        top = set(st.argmax())
        for k in self.order:
            if k in top:
                return self.candidates[k]
        raise AssertionError("argmax returned no candidate")

    def grid_estimates(self) -> np.ndarray:
        out = np.empty((len(self.rows), len(self.cols), 2))
        for i, row in enumerate(self.states):
            for j, st in enumerate(row):
                out[i, j] = self._choose(st)
        return out

    def field(self) -> MotionField:
        vec = interpolate_grid(self.grid_estimates(), self.rows, self.cols, self.height, self.width)
        return MotionField(vec, self.stride)


def estimate_motion(frames, candidates=None, stride: int = 8, value_max: float | None = None,
                    radius: int = PATCH_RADIUS) -> MotionField:
    """Run the estimator over consecutive pairs of ``frames`` and return the final field."""
    frames = [np.asarray(f, dtype=float) for f in frames]
    if len(frames) < 2:
        raise InvalidArgument("motion estimation needs at least two frames")
    if value_max is None:
        value_max = max(float(f.max()) for f in frames) or 1.0
    h, w = frames[0].shape
    est = MotionEstimator(h, w, stride, candidates, value_max, radius)
    for prev, cur in zip(frames, frames[1:]):
        est.update(prev, cur)
    return est.field()
