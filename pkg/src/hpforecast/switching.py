"""Switching: exponentially weighted expert mixing with a switching prior.

Weights are kept as logarithms so long runs do not underflow; ``beta``
exposes them in the linear domain. Experts are indexed from 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import InvalidArgument


@dataclass(frozen=True)
class HarmonicRate:
    """``alpha_t = 1/(t + 1)``."""

    def __call__(self, t: int) -> float:
        return 1.0 / (t + 1)

    def to_dict(self) -> dict:
        return {"kind": "harmonic"}


@dataclass(frozen=True)
class ConstantRate:
    alpha: float

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise InvalidArgument("switching rate must lie in (0, 1)")

    def __call__(self, t: int) -> float:
        return self.alpha

    def to_dict(self) -> dict:
        return {"kind": "constant", "alpha": self.alpha}


def rate_from_dict(d: dict):
    if d["kind"] == "harmonic":
        return HarmonicRate()
    if d["kind"] == "constant":
        return ConstantRate(float(d["alpha"]))
    raise InvalidArgument(f"unknown rate schedule {d['kind']!r}")


@dataclass
class SwitchingState:
    log_beta: np.ndarray
    eta: float
    rate: object = HarmonicRate()
    t: int = 0

    @property
    def m(self) -> int:
        return len(self.log_beta)

    @property
    def beta(self) -> np.ndarray:
        return np.exp(self.log_beta)

    def log_total(self) -> float:
        return float(logsumexp(self.log_beta))

    def weights(self) -> np.ndarray:
        """Normalised mixing weights."""
        z = self.log_beta - self.log_beta.max()
        e = np.exp(z)
        return e / e.sum()

    def combine(self, predictions) -> float:
        p = np.asarray(predictions, dtype=float)
        if p.shape != (self.m,):
            raise InvalidArgument(f"expected {self.m} predictions, got {p.shape}")
        z = np.exp(self.log_beta - self.log_beta.max())
        return float(z @ p / z.sum())

    def update(self, losses, alpha: float | None = None) -> "SwitchingState":
        """Exponentiated-loss step with switching mass ``alpha`` (default from the schedule); in place."""
        losses = np.asarray(losses, dtype=float)
        if losses.shape != (self.m,) or not np.all(np.isfinite(losses)):
            raise InvalidArgument("losses must be a finite vector of length m")
        a = self.rate(self.t + 1) if alpha is None else alpha
        if not 0.0 < a < 1.0:
            raise InvalidArgument(f"switching rate {a} outside (0, 1)")
        g = self.log_beta - self.eta * losses
        top = g.max()
        e = np.exp(g - top)
        s = e.sum()
        mixed = (1.0 - a) * e + (a / (self.m - 1)) * np.maximum(s - e, 0.0)
        with np.errstate(divide="ignore"):
            self.log_beta = top + np.log(mixed)
        self.t += 1
        return self

    def argmax(self, tol: float = 1e-12) -> list[int]:
        """Indices whose weight is within relative ``tol`` of the largest."""
        top = self.log_beta.max()
        return [int(i) for i in np.flatnonzero(self.log_beta >= top - tol)]

    def copy(self) -> "SwitchingState":
        return SwitchingState(self.log_beta.copy(), self.eta, self.rate, self.t)

    def to_dict(self) -> dict:
        return {"log_beta": [float(v) for v in self.log_beta], "eta": self.eta,
                "rate": self.rate.to_dict(), "t": self.t}

    @classmethod
    def from_dict(cls, d: dict) -> "SwitchingState":
        return cls(np.array(d["log_beta"], dtype=float), float(d["eta"]),
                   rate_from_dict(d["rate"]), int(d["t"]))


def switching_init(m: int, eta: float, rate=None) -> SwitchingState:
    if m < 2:
        raise InvalidArgument("switching needs at least two experts")
    if not eta > 0:
        raise InvalidArgument("eta must be positive")
    return SwitchingState(np.full(m, -math.log(m)), float(eta), rate or HarmonicRate())


def switching_combine(state: SwitchingState, predictions) -> float:
    return state.combine(predictions)


def switching_update(state: SwitchingState, losses, alpha: float | None = None) -> SwitchingState:
    return state.copy().update(losses, alpha)


def mix_loss(state: SwitchingState, losses) -> float:
    """``-1/eta log`` of the weight-averaged ``exp(-eta * loss)``.

    For a bare loss matrix this is the tightest per-round loss the combined
    forecaster can be charged while the monotonicity invariant still holds.
    """
    losses = np.asarray(losses, dtype=float)
    lw = state.log_beta - state.log_total()
    return -float(logsumexp(lw - state.eta * losses)) / state.eta


# -- switching sequences ----------------------------------------------------

def switch_set(seq: Sequence[int]) -> list[int]:
    """1-based rounds ``t < T`` with ``i_t != i_{t+1}``."""
    return [t + 1 for t in range(len(seq) - 1) if seq[t] != seq[t + 1]]


def log_switching_prior(seq: Sequence[int], m: int, rate=None) -> float:
    rate = rate or HarmonicRate()
    if any(not 0 <= i < m for i in seq):
        raise InvalidArgument("expert index out of range")
    if not seq:
        return 0.0
    lw = -math.log(m)
    for t in range(1, len(seq)):
        a = rate(t)
        lw += math.log(a / (m - 1)) if seq[t] != seq[t - 1] else math.log1p(-a)
    return lw


def switching_prior(seq: Sequence[int], m: int, rate=None) -> float:
    return math.exp(log_switching_prior(seq, m, rate))


def switching_bound(T: int, m: int, seq: Sequence[int], eta: float, rate=None) -> float:
    """Excess loss allowed against switching sequence ``seq`` after ``T`` rounds."""
    rate = rate or HarmonicRate()
    if T < 1 or len(seq) != T:
        raise InvalidArgument("sequence length must equal T >= 1")
    switches = set(switch_set(seq))
    total = math.log(m) + len(switches) * math.log(m - 1)
    for t in range(1, T):
        a = rate(t)
        total += -math.log(a) if t in switches else -math.log1p(-a)
    return total / eta


def sequence_loss(loss_matrix, seq: Sequence[int]) -> float:
    L = np.asarray(loss_matrix, dtype=float)
    return float(sum(L[t, i] for t, i in enumerate(seq)))


def best_switching_sequence(loss_matrix, switches: int | None = None
                            ) -> tuple[tuple[int, ...], float] | None:
    """Minimum-loss switching sequence by dynamic programming.

    With ``switches=None`` any number of switches is allowed; otherwise the
    sequence must switch exactly that many times (``None`` is returned when
    impossible). Ties go to the lexicographically smallest sequence.
    """
    L = np.asarray(loss_matrix, dtype=float)
    T, m = L.shape
    if T < 1:
        raise InvalidArgument("need at least one round")
    if switches is None:
        seq = tuple(int(np.argmin(row)) for row in L)
        return seq, sequence_loss(L, seq)
    if switches < 0 or switches > T - 1 or (switches > 0 and m < 2):
        return None
    K = switches
    inf = math.inf
    # V[t, i, k]: best loss of rounds t..T-1 given expert i at t and k switches still to make.
    V = np.full((T, m, K + 1), inf)
    V[T - 1, :, 0] = L[T - 1]
    for t in range(T - 2, -1, -1):
        nxt = V[t + 1]
        for k in range(K + 1):
            stay = nxt[:, k]
            if k > 0:
                other = nxt[:, k - 1]
                best_other = np.array([min((other[j] for j in range(m) if j != i), default=inf)
                                       for i in range(m)])
            else:
                best_other = np.full(m, inf)
            V[t, :, k] = L[t] + np.minimum(stay, best_other)
    first = V[0, :, K]
    if not np.isfinite(first.min()):
        return None
    i = int(np.flatnonzero(first == first.min())[0])
    seq, k = [i], K
    for t in range(1, T):
        options = [(V[t, j, k if j == i else k - 1], j) for j in range(m)
                   if j == i or k > 0]
        best = min(v for v, _ in options)
        j = min(j for v, j in options if v == best)
        k = k if j == i else k - 1
        i = j
        seq.append(i)
    seq = tuple(seq)
    return seq, sequence_loss(L, seq)


# -- runs -------------------------------------------------------------------

@dataclass
class SwitchingRun:
    """Trajectory of one switching run: per-round algorithm losses and log-weights.

    ``log_betas[t]`` holds the weights after ``t`` updates (row 0 is the prior).
    """

    loss_matrix: np.ndarray
    algorithm_losses: np.ndarray
    log_betas: np.ndarray
    eta: float
    rate: object

    @property
    def total_loss(self) -> float:
        return math.fsum(self.algorithm_losses)


def run_switching(loss_matrix, eta: float, rate=None, predictions=None, loss_fns=None) -> SwitchingRun:
    """Run switching over ``T x m`` expert losses.

    With ``predictions`` (``T x m``) and per-round ``loss_fns`` the algorithm is
    charged ``loss_fns[t](combined prediction)``; otherwise it is charged the
    mix loss.
    """
    L = np.asarray(loss_matrix, dtype=float)
    T, m = L.shape
    st = switching_init(m, eta, rate)
    alg = np.empty(T)
    logs = np.empty((T + 1, m))
    logs[0] = st.log_beta
    for t in range(T):
        if predictions is None:
            alg[t] = mix_loss(st, L[t])
        else:
            alg[t] = loss_fns[t](st.combine(predictions[t]))
        st.update(L[t])
        logs[t + 1] = st.log_beta
    return SwitchingRun(L, alg, logs, st.eta, st.rate)
