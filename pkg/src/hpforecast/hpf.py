"""Hierarchical partitioning forecaster with linear per-segment learners.

Every indivisible segment owns an FTAL learner. Every divisible segment owns
an FTAL learner for its own base prediction plus a two-expert switching
mixer that blends that base prediction with the blended prediction coming up
from the child on the routing path. Only segments containing the current
point learn.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

import numpy as np

from .errors import InvalidArgument
from .ftal import FtalState, ParameterSet, ftal_init, ftal_regret_constant, parameter_set_from_dict
from .losses import LossFunction
from .partition import HierarchicalPartition, InducedPartition
from .switching import SwitchingState, switching_init


@dataclass(frozen=True)
class LearnerConfig:
    n: int
    w_set: ParameterSet
    gamma: float
    eta: float
    G: float | None = None
    strict_paper_indexing: bool = False
    global_switch_clock: bool = False

    def to_dict(self) -> dict:
        return {"n": self.n, "w_set": self.w_set.to_dict(), "gamma": self.gamma,
                "eta": self.eta, "G": self.G,
                "strict_paper_indexing": self.strict_paper_indexing,
                "global_switch_clock": self.global_switch_clock}

    @classmethod
    def from_dict(cls, d: dict) -> "LearnerConfig":
        return cls(int(d["n"]), parameter_set_from_dict(d["w_set"]), float(d["gamma"]),
                   float(d["eta"]), None if d.get("G") is None else float(d["G"]),
                   bool(d.get("strict_paper_indexing", False)),
                   bool(d.get("global_switch_clock", False)))


@dataclass
class DivisibleLearnerState:
    ftal: FtalState
    switch: SwitchingState
    local_t: int = 0

    def copy(self) -> "DivisibleLearnerState":
        return DivisibleLearnerState(self.ftal.copy(), self.switch.copy(), self.local_t)


class TraceEntry(NamedTuple):
    segment: int
    h: float
    u: float  # the segment's own linear prediction


@dataclass
class RoundRecord:
    t: int
    prediction: float
    loss: float
    trace: list[TraceEntry]


class HpfModel:
    def __init__(self, h: HierarchicalPartition, config: LearnerConfig):
        self.h = h
        self.config = config
        self.t = 0
        self.divisible_states: dict[int, DivisibleLearnerState] = {}
        self.indivisible_states: dict[int, FtalState] = {}
        for seg in h.segments:
            f = self._fresh_ftal()
            if seg.children:
                self.divisible_states[seg.id] = DivisibleLearnerState(f, switching_init(2, config.eta))
            else:
                self.indivisible_states[seg.id] = f

    def _fresh_ftal(self) -> FtalState:
        c = self.config
        return ftal_init(c.n, c.w_set, c.gamma, c.G, c.strict_paper_indexing)

    def ftal_of(self, sid: int) -> FtalState:
        if sid in self.indivisible_states:
            return self.indivisible_states[sid]
        return self.divisible_states[sid].ftal

    def predict(self, x, point=None) -> tuple[float, list[TraceEntry]]:
        """Blend bottom-up along the routing path of ``point`` (defaults to ``x``).

        The trace runs root to leaf; ``trace[0].h`` is the forecast.
        """
        x = np.asarray(x, dtype=float)
        path = self.h.route(x if point is None else point)
        leaf = path[-1]
        u = self.indivisible_states[leaf].predict(x)
        trace = [TraceEntry(leaf, u, u)]
        v = u
        for sid in reversed(path[:-1]):
            st = self.divisible_states[sid]
            u = st.ftal.predict(x)
            v = st.switch.combine((u, v))
            trace.append(TraceEntry(sid, v, u))
        trace.reverse()
        return trace[0].h, trace

    def update(self, x, loss: LossFunction, point=None) -> RoundRecord:
        """Predict, then let every segment on the path learn from the pre-update trace."""
        x = np.asarray(x, dtype=float)
        y, trace = self.predict(x, point)
        self.t += 1
        for i, entry in enumerate(trace):
            sid = entry.segment
            if i == len(trace) - 1:
                self.indivisible_states[sid].update(loss, x)
                continue
            st = self.divisible_states[sid]
            v = trace[i + 1].h
            expert_losses = (loss(entry.u), loss(v))
            st.ftal.update(loss, x)
            st.local_t += 1
            clock = self.t if self.config.global_switch_clock else st.local_t
            st.switch.update(expert_losses, alpha=1.0 / (clock + 1))
        return RoundRecord(self.t, y, loss(y), trace)

    def segment_digest(self, sid: int) -> str:
        """SHA-256 over the raw bytes of one segment's learner state."""
        hsh = hashlib.sha256()
        f = self.ftal_of(sid)
        for arr in (f.A, f.b, f.w):
            hsh.update(np.ascontiguousarray(arr).tobytes())
        hsh.update(repr((f.t, f.gamma)).encode())
        if sid in self.divisible_states:
            st = self.divisible_states[sid]
            hsh.update(st.switch.log_beta.tobytes())
            hsh.update(repr((st.switch.t, st.local_t)).encode())
        return hsh.hexdigest()

    # -- checkpoints --

    def to_dict(self) -> dict:
        return {
            "partition": self.h.to_dict(),
            "config": self.config.to_dict(),
            "t": self.t,
            "indivisible": {str(k): v.to_dict() for k, v in self.indivisible_states.items()},
            "divisible": {
                str(k): {"ftal": v.ftal.to_dict(), "switch": v.switch.to_dict(), "local_t": v.local_t}
                for k, v in self.divisible_states.items()
            },
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "HpfModel":
        model = cls(HierarchicalPartition.from_dict(d["partition"]), LearnerConfig.from_dict(d["config"]))
        model.t = int(d["t"])
        model.indivisible_states = {int(k): FtalState.from_dict(v) for k, v in d["indivisible"].items()}
        model.divisible_states = {
            int(k): DivisibleLearnerState(FtalState.from_dict(v["ftal"]),
                                          SwitchingState.from_dict(v["switch"]), int(v["local_t"]))
            for k, v in d["divisible"].items()
        }
        return model

    @classmethod
    def loads(cls, text: str) -> "HpfModel":
        return cls.from_dict(json.loads(text))


def hpf_predict(model: HpfModel, x, point=None):
    return model.predict(x, point)


def hpf_update(model: HpfModel, x, loss: LossFunction, point=None) -> RoundRecord:
    return model.update(x, loss, point)


# -- run logs ---------------------------------------------------------------

@dataclass
class RunLog:
    """Per-round predictions and losses plus per-segment accumulated losses."""

    predictions: list[float] = field(default_factory=list)
    losses: list[float] = field(default_factory=list)
    segment_loss: dict[int, float] = field(default_factory=dict)
    segment_count: dict[int, int] = field(default_factory=dict)

    @property
    def total_loss(self) -> float:
        return math.fsum(self.losses)

    @property
    def T(self) -> int:
        return len(self.losses)

    def record(self, rec: RoundRecord, loss: LossFunction) -> None:
        self.predictions.append(rec.prediction)
        self.losses.append(rec.loss)
        for e in rec.trace:
            self.segment_loss[e.segment] = self.segment_loss.get(e.segment, 0.0) + loss(e.h)
            self.segment_count[e.segment] = self.segment_count.get(e.segment, 0) + 1


def run_stream(model: HpfModel, stream: Iterable) -> RunLog:
    """Feed ``Round`` records through ``model``; returns the run log."""
    log = RunLog()
    for r in stream:
        log.record(model.update(r.x, r.loss, r.point), r.loss)
    return log


# -- constant partitioning forecaster ---------------------------------------

@dataclass
class CpfModel:
    h: HierarchicalPartition
    p: InducedPartition
    weights: dict[int, np.ndarray]

    def __post_init__(self):
        if set(self.weights) != set(self.p.segment_ids):
            raise InvalidArgument("CPF weights must be keyed exactly by the partition members")

    def segment_of(self, point) -> int:
        for sid in self.h.route(point):
            if sid in self.p:
                return sid
        raise InvalidArgument(f"no member of the partition contains {point!r}")

    def predict(self, x, point=None) -> float:
        x = np.asarray(x, dtype=float)
        sid = self.segment_of(x if point is None else point)
        return float(self.weights[sid] @ x)


def cpf_predict(model: CpfModel, x, point=None) -> float:
    return model.predict(x, point)


def lhpf_regret_bound(n: int, eta: float, G: float, D: float, p_size: int, c: int, T: int) -> float:
    A = ftal_regret_constant(n, eta, G, D)
    B = 1.0 / eta
    return (A * p_size + B * c) * (1.0 + math.log(T))
