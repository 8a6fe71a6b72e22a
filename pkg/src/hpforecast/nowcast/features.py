"""Motion-path accumulation and rotated disk features."""
from __future__ import annotations

import math

import numpy as np

from .motion import MotionField

FEATURE_RADIUS = 7
MIN_DISPLACEMENT = 0.5


def disk_offsets(radius: int = FEATURE_RADIUS) -> np.ndarray:
    """Integer ``(dx, dy)`` with ``dx^2 + dy^2 <= radius^2``, row-major (dy outer)."""
    r = np.arange(-radius, radius + 1)
    out = [(dx, dy) for dy in r for dx in r if dx * dx + dy * dy <= radius * radius]
    return np.array(out, dtype=float)


_OFFSETS = disk_offsets()
FEATURE_LENGTH = len(_OFFSETS) + 1


def bilinear(frame: np.ndarray, xs, ys) -> np.ndarray:
    """Bilinear reads at real-valued ``(xs, ys)``; out-of-frame reads clamp to the border."""
    h, w = frame.shape
    xs = np.clip(np.asarray(xs, dtype=float), 0.0, w - 1.0)
    ys = np.clip(np.asarray(ys, dtype=float), 0.0, h - 1.0)
    x0 = np.floor(xs).astype(int)
    y0 = np.floor(ys).astype(int)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx, fy = xs - x0, ys - y0
    top = (1 - fx) * frame[y0, x0] + fx * frame[y0, x1]
    bot = (1 - fx) * frame[y1, x0] + fx * frame[y1, x1]
    return (1 - fy) * top + fy * bot


def accumulate_path(field: MotionField, u, steps: int) -> list[tuple[float, float]]:
    """Follow the flow backwards: ``u_{k+1} = u_k - d(u_k)``, clamped to the frame."""
    h, w = field.shape
    x, y = float(u[0]), float(u[1])
    path = [(x, y)]
    for _ in range(steps):
        dx, dy = field.sample(x, y)
        x = min(max(x - dx, 0.0), w - 1.0)
        y = min(max(y - dy, 0.0), h - 1.0)
        path.append((x, y))
    return path


def displacement_angle(u, u_h) -> float:
    dx, dy = u_h[0] - u[0], u_h[1] - u[1]
    if math.hypot(dx, dy) < MIN_DISPLACEMENT:
        return 0.0
    return math.atan2(dy, dx)


def build_feature(frame: np.ndarray, path, u=None) -> np.ndarray:
    """Disk around the path end, read in the frame aligned with the displacement, plus a bias."""
    u = path[0] if u is None else u
    u_h = path[-1]
    theta = displacement_angle(u, u_h)
    c, s = math.cos(theta), math.sin(theta)
    ox, oy = _OFFSETS[:, 0], _OFFSETS[:, 1]
    xs = u_h[0] + c * ox - s * oy
    ys = u_h[1] + s * ox + c * oy
    return np.append(bilinear(frame, xs, ys), 1.0)


def build_features(frame: np.ndarray, starts: np.ndarray, ends: np.ndarray) -> np.ndarray:
    """Vectorised :func:`build_feature` for many ``(u, u_H)`` pairs, shape ``(N, 150)``."""
    starts = np.asarray(starts, dtype=float).reshape(-1, 2)
    ends = np.asarray(ends, dtype=float).reshape(-1, 2)
    d = ends - starts
    theta = np.where(np.hypot(d[:, 0], d[:, 1]) < MIN_DISPLACEMENT, 0.0, np.arctan2(d[:, 1], d[:, 0]))
    c, s = np.cos(theta)[:, None], np.sin(theta)[:, None]
    ox, oy = _OFFSETS[None, :, 0], _OFFSETS[None, :, 1]
    xs = ends[:, :1] + c * ox - s * oy
    ys = ends[:, 1:] + s * ox + c * oy
    vals = bilinear(frame, xs, ys)
    return np.concatenate([vals, np.ones((len(ends), 1))], axis=1)
