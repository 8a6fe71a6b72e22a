"""Round records and synthetic stream generators for certification runs."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument
from .losses import LossFunction, squared
from .partition import GridRect, HierarchicalPartition


@dataclass(frozen=True)
class Round:
    x: np.ndarray
    loss: LossFunction
    point: np.ndarray | None = None

    @property
    def route_point(self) -> np.ndarray:
        return self.x if self.point is None else self.point


def _features(rng, T, n, radius):
    # Non-negative directions scaled to norm at most ``radius``.
    x = np.abs(rng.standard_normal((T, n)))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    return x * radius * rng.uniform(0.5, 1.0, (T, 1))


def linear_stream(T: int, n: int, seed: int, noise: float = 0.05, feature_radius: float = 0.5,
                  weight_radius: float = 0.9) -> tuple[list[Round], np.ndarray]:
    """Realizable-plus-noise squared-loss stream over ``W = ball(0, 1)``.

    Features are non-negative with norm at most ``feature_radius``; targets are
    clipped to ``[0, 1 - feature_radius]`` so every prediction ``w.x`` with
    ``|w| <= 1`` is within distance 1 of its target and the declared
    ``[0, 1]`` squared loss stays 1/2-exp-concave on all of W.
    """
    if not 0 < feature_radius < 1:
        raise InvalidArgument("feature_radius must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    w_true = np.abs(rng.standard_normal(n))
    w_true *= weight_radius / np.linalg.norm(w_true)
    X = _features(rng, T, n, feature_radius)
    z = np.clip(X @ w_true + noise * rng.standard_normal(T), 0.0, 1.0 - feature_radius)
    return [Round(X[t], squared(z[t], 0.0, 1.0)) for t in range(T)], w_true


def piecewise_quadrant_stream(h: HierarchicalPartition, T: int, n: int, seed: int,
                              noise: float = 0.0, feature_radius: float = 0.5,
                              weight_radius: float = 0.9) -> tuple[list[Round], dict[int, np.ndarray]]:
    """Points on the grid of ``h``; each leaf has its own true weight vector.

    Targets follow the same clipping rule as :func:`linear_stream`, so the
    loss is 1/2-exp-concave for every weight vector in the unit ball.
    """
    root = h[h.root].predicate
    if not isinstance(root, GridRect):
        raise InvalidArgument("piecewise generator needs a grid partition")
    rng = np.random.default_rng(seed)
    truths = {}
    for leaf in h.leaf_ids():
        w = np.abs(rng.standard_normal(n))
        truths[leaf] = w * weight_radius / np.linalg.norm(w)
    pts = np.column_stack([rng.uniform(root.x0, root.x1, T), rng.uniform(root.y0, root.y1, T)])
    X = _features(rng, T, n, feature_radius)
    eps = noise * rng.standard_normal(T)
    out = []
    for t in range(T):
        leaf = h.route(pts[t])[-1]
        z = float(np.clip(X[t] @ truths[leaf] + eps[t], 0.0, 1.0 - feature_radius))
        out.append(Round(X[t], squared(z, 0.0, 1.0), pts[t]))
    return out, truths


def expert_stream(T: int, m: int, seed: int, spread: float = 0.7):
    """Expert predictions and targets in ``[0, spread]`` with squared loss.

    With ``spread <= 1/sqrt(2)`` the squared loss is 1-exp-concave over every
    convex combination of the experts.
    """
    rng = np.random.default_rng(seed)
    preds = rng.uniform(0.0, spread, (T, m))
    # Experts take turns being accurate so switching matters.
    best = (np.arange(T) // max(1, T // 7)) % m
    targets = np.clip(preds[np.arange(T), best] + 0.05 * rng.standard_normal(T), 0.0, spread)
    return preds, targets
