"""Forecast verification scores."""
from __future__ import annotations

import numpy as np

from ..errors import InvalidArgument

CSI_THRESHOLDS = (1.0, 2.0, 4.0, 8.0)


def contingency(pred, truth, threshold: float) -> tuple[int, int, int]:
    """``(hits, misses, false alarms)`` with events defined as ``value >= threshold``."""
    pred = np.asarray(pred, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if pred.shape != truth.shape:
        raise InvalidArgument(f"shape mismatch {pred.shape} vs {truth.shape}")
    p, o = pred >= threshold, truth >= threshold
    return int(np.sum(p & o)), int(np.sum(~p & o)), int(np.sum(p & ~o))


def csi_from_counts(tp: int, fn: int, fp: int) -> float:
    denom = tp + fn + fp
    return 1.0 if denom == 0 else tp / denom


def csi(pred, truth, threshold: float) -> float:
    return csi_from_counts(*contingency(pred, truth, threshold))


def mse(pred, truth) -> float:
    pred = np.asarray(pred, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if pred.shape != truth.shape:
        raise InvalidArgument(f"shape mismatch {pred.shape} vs {truth.shape}")
    if pred.size == 0:
        raise InvalidArgument("no values to score")
    return float(np.mean((pred - truth) ** 2))
