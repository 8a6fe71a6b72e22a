"""Experiment configuration: a JSON file plus command-line overrides."""
from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .errors import InvalidArgument
from .nowcast.pipeline import NowcastConfig
from .nowcast.synth import SynthConfig

MODES = ("regret-certify", "switching-certify", "nowcast", "synth-data")
PARTITION_KINDS = ("single", "quadtree", "halfspaces")


@dataclass(frozen=True)
class PartitionSpec:
    kind: str = "quadtree"
    width: int = 64
    height: int = 64
    levels: int = 2
    depth: int = 2
    mu: float = 0.0
    sigma: float = 1.0

    def __post_init__(self):
        if self.kind not in PARTITION_KINDS:
            raise InvalidArgument(f"partition kind must be one of {PARTITION_KINDS}")


@dataclass(frozen=True)
class LearnerSpec:
    n: int = 4
    radius: float = 1.0
    eta: float | None = None
    G: float | None = None
    gamma: float | None = None
    per_segment: bool = False

    def __post_init__(self):
        if self.n < 1 or not self.radius > 0:
            raise InvalidArgument("learner needs n >= 1 and radius > 0")
        if self.gamma is not None and not self.gamma > 0:
            raise InvalidArgument("gamma override must be > 0")
        if self.eta is not None and not self.eta > 0:
            raise InvalidArgument("eta override must be > 0")
        if self.G is not None and not self.G > 0:
            raise InvalidArgument("G override must be > 0")


@dataclass(frozen=True)
class StreamSpec:
    T: int = 1000
    noise: float = 0.05

    def __post_init__(self):
        if self.T < 1 or self.noise < 0:
            raise InvalidArgument("stream needs T >= 1 and noise >= 0")


@dataclass(frozen=True)
class SwitchingSpec:
    m: int = 3
    T: int = 6
    eta: float = 1.0
    instances: int = 1
    mode: str = "auto"

    def __post_init__(self):
        if self.m < 2 or self.T < 1 or self.instances < 1 or not self.eta > 0:
            raise InvalidArgument("switching needs m >= 2, T >= 1, instances >= 1, eta > 0")
        if self.mode not in ("auto", "exhaustive", "dp"):
            raise InvalidArgument("switching mode must be auto, exhaustive or dp")


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str = "regret-certify"
    seed: int = 0
    out: str = "out"
    partition: PartitionSpec = field(default_factory=PartitionSpec)
    learner: LearnerSpec = field(default_factory=LearnerSpec)
    stream: StreamSpec = field(default_factory=StreamSpec)
    switching: SwitchingSpec = field(default_factory=SwitchingSpec)
    synth: SynthConfig = field(default_factory=SynthConfig)
    nowcast: NowcastConfig = field(default_factory=NowcastConfig)
    strict_paper_indexing: bool = False
    global_switch_clock: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise InvalidArgument(f"mode must be one of {MODES}, got {self.mode!r}")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or self.seed < 0:
            raise InvalidArgument("seed must be a non-negative integer")
        if not isinstance(self.out, str) or not self.out:
            raise InvalidArgument("out must be a non-empty path")
        for flag in ("strict_paper_indexing", "global_switch_clock"):
            if not isinstance(getattr(self, flag), bool):
                raise InvalidArgument(f"{flag} must be true or false")

    def to_dict(self) -> dict:
        return asdict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


_SECTIONS = {
    "partition": PartitionSpec,
    "learner": LearnerSpec,
    "stream": StreamSpec,
    "switching": SwitchingSpec,
    "synth": SynthConfig,
    "nowcast": NowcastConfig,
}


def _build_section(cls, value):
    if not isinstance(value, dict):
        raise InvalidArgument(f"section {cls.__name__} must be an object")
    known = {f.name for f in fields(cls)}
    unknown = set(value) - known
    if unknown:
        raise InvalidArgument(f"unknown keys in {cls.__name__}: {sorted(unknown)}")
    try:
        if hasattr(cls, "from_dict"):
            return cls.from_dict(value)
        return cls(**value)
    except TypeError as exc:
        raise InvalidArgument(str(exc)) from exc


def config_from_dict(d: dict) -> ExperimentConfig:
    if not isinstance(d, dict):
        raise InvalidArgument("config must be a JSON object")
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(d) - known
    if unknown:
        raise InvalidArgument(f"unknown config keys: {sorted(unknown)}")
    kwargs = {}
    for k, v in d.items():
        kwargs[k] = _build_section(_SECTIONS[k], v) if k in _SECTIONS else v
    try:
        return ExperimentConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise InvalidArgument(str(exc)) from exc


def load_config(path) -> ExperimentConfig:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidArgument(f"cannot read config {path}: {exc}") from exc
    return config_from_dict(data)


def with_overrides(cfg: ExperimentConfig, **overrides) -> ExperimentConfig:
    return replace(cfg, **{k: v for k, v in overrides.items() if v is not None})


def thread_count() -> int:
    """Worker cap from ``HPF_THREADS`` (default 1)."""
    raw = os.environ.get("HPF_THREADS", "1")
    try:
        n = int(raw)
    except ValueError as exc:
        raise InvalidArgument(f"HPF_THREADS must be an integer, got {raw!r}") from exc
    if n < 1:
        raise InvalidArgument("HPF_THREADS must be >= 1")
    return n
