"""Exp-concave per-round losses for scalar predictions.

Two kinds are supported: squared error against a real target, with a declared
bounded prediction range, and log-loss against a binary target with the
prediction clamped to ``[eps, 1 - eps]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidArgument

SQUARED = "squared"
LOG = "log"


@dataclass(frozen=True)
class LossFunction:
    kind: str
    target: float
    lo: float = 0.0
    hi: float = 1.0
    eps: float = 1e-6
    eta: float | None = None

    def __post_init__(self):
        if self.kind not in (SQUARED, LOG):
            raise InvalidArgument(f"unknown loss kind {self.kind!r}")
        if self.kind == LOG and self.target not in (0, 1):
            raise InvalidArgument("log-loss target must be 0 or 1")
        if self.eta is None:
            object.__setattr__(self, "eta", default_eta(self))
        elif not self.eta > 0:
            raise InvalidArgument("eta must be positive")

    def __call__(self, y: float) -> float:
        return evaluate(self, y)


def squared(target: float, lo: float = 0.0, hi: float = 1.0, eta: float | None = None) -> LossFunction:
    return LossFunction(SQUARED, float(target), float(lo), float(hi), eta=eta)


def log_loss(target: int, eps: float = 1e-6, eta: float | None = None) -> LossFunction:
    return LossFunction(LOG, float(target), eps=float(eps), eta=eta)


def default_eta(loss: LossFunction) -> float:
    """Exp-concavity constant: ``1/(2C^2)`` for squared loss on a range of width C, 1 for log-loss."""
    if loss.kind == SQUARED:
        width = loss.hi - loss.lo
        if not math.isfinite(width) or width <= 0:
            raise InvalidArgument("squared loss needs a bounded, non-empty prediction range")
        return 1.0 / (2.0 * width * width)
    return 1.0


def _clamp(loss: LossFunction, y: float) -> float:
    return min(max(y, loss.eps), 1.0 - loss.eps)


def evaluate(loss: LossFunction, y: float) -> float:
    y = float(y)
    if not math.isfinite(y):
        raise InvalidArgument(f"non-finite prediction {y}")
    if loss.kind == SQUARED:
        return (y - loss.target) ** 2
    p = _clamp(loss, y)
    return -math.log(p) if loss.target == 1 else -math.log1p(-p)


def derivative(loss: LossFunction, y: float) -> float:
    """Derivative of the loss in the prediction (zero where log-loss is clamped)."""
    if loss.kind == SQUARED:
        return 2.0 * (y - loss.target)
    if y < loss.eps or y > 1.0 - loss.eps:
        return 0.0
    return -1.0 / y if loss.target == 1 else 1.0 / (1.0 - y)


def grad_wrt_weights(loss: LossFunction, x, w) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    if x.shape != w.shape:
        raise InvalidArgument(f"dimension mismatch {x.shape} vs {w.shape}")
    return derivative(loss, float(w @ x)) * x


def with_eta(loss: LossFunction, eta: float) -> LossFunction:
    return replace(loss, eta=eta)


def exp_concave_on(loss: LossFunction, eta: float | None = None, lo: float | None = None,
                   hi: float | None = None, points: int = 1000, tol: float = 1e-9) -> bool:
    """Numerically test concavity of ``exp(-eta * loss)`` on a grid over ``[lo, hi]``.

    Defaults to the declared range (squared) or ``[eps, 1 - eps]`` (log-loss).
    Passes when every second difference is at most ``tol``.
    """
    eta = loss.eta if eta is None else eta
    if lo is None or hi is None:
        lo, hi = (loss.lo, loss.hi) if loss.kind == SQUARED else (loss.eps, 1.0 - loss.eps)
    ys = np.linspace(lo, hi, points)
    vals = np.exp(-eta * np.array([evaluate(loss, y) for y in ys]))
    second = vals[:-2] - 2.0 * vals[1:-1] + vals[2:]
    return bool(np.all(second <= tol))


def max_abs_derivative(loss: LossFunction, lo: float, hi: float) -> float:
    """Supremum of ``|loss'(y)|`` over predictions ``y`` in ``[lo, hi]``."""
    if loss.kind == SQUARED:
        return 2.0 * max(abs(lo - loss.target), abs(hi - loss.target))
    a, b = _clamp(loss, lo), _clamp(loss, hi)
    # |loss'| is monotone inside the clamp and zero outside it.
    if loss.target == 1:
        return 1.0 / a
    return 1.0 / (1.0 - b)


def eta_valid_on(loss: LossFunction, lo: float, hi: float) -> bool:
    """Whether ``loss`` is ``loss.eta``-exp-concave for all predictions in ``[lo, hi]``.

    Squared loss needs ``eta * 2 * (y - target)^2 <= 1`` throughout. Log-loss
    needs ``eta <= 1`` and the range inside the clamp, since the clamp kink
    breaks concavity of ``exp(-loss)``.
    """
    if loss.kind == SQUARED:
        dev = max(abs(lo - loss.target), abs(hi - loss.target))
        return 2.0 * loss.eta * dev * dev <= 1.0 + 1e-12
    return loss.eta <= 1.0 and loss.eps <= lo and hi <= 1.0 - loss.eps
