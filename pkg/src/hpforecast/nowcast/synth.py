"""Synthetic precipitation rasters: Gaussian rain cells carried by a smooth flow."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..errors import InvalidArgument

MIN_SIZE = 128
QUANT_LEVELS = 4095


@dataclass
class RasterSequence:
    frames: list[np.ndarray]
    dt: float = 5.0

    def __post_init__(self):
        if not self.frames:
            raise InvalidArgument("raster sequence needs at least one frame")
        shape = self.frames[0].shape
        for k, f in enumerate(self.frames):
            if f.ndim != 2 or f.shape != shape:
                raise InvalidArgument(f"frame {k} has shape {f.shape}, expected {shape}")
            if not np.all(np.isfinite(f)) or f.min() < 0:
                raise InvalidArgument(f"frame {k} has negative or non-finite values")
        if not self.dt > 0:
            raise InvalidArgument("dt must be positive")

    @property
    def shape(self) -> tuple[int, int]:
        return self.frames[0].shape

    def __len__(self) -> int:
        return len(self.frames)

    def array(self) -> np.ndarray:
        return np.stack(self.frames)


@dataclass(frozen=True)
class SynthConfig:
    width: int = 256
    height: int = 256
    frames: int = 60
    blobs: int = 80
    velocity: tuple[float, float] = (2.0, 0.0)
    rotation: float = 0.0          # radians per frame about the image centre
    amplitude: tuple[float, float] = (0.5, 6.0)
    sigma: tuple[float, float] = (2.5, 8.0)
    noise: float = 0.0
    quantize_max: float | None = None
    dt: float = 5.0
    seed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        d = dict(d)
        for key in ("velocity", "amplitude", "sigma"):
            if key in d:
                d[key] = tuple(float(v) for v in d[key])
        return cls(**d)


@dataclass(frozen=True)
class Blob:
    x: float
    y: float
    amplitude: float
    sigma: float


def blob_centres(blobs: list[Blob], cfg: SynthConfig, k: int) -> np.ndarray:
    """Centres of every blob in frame ``k``."""
    c = np.array([[b.x, b.y] for b in blobs], dtype=float).reshape(-1, 2)
    mid = np.array([(cfg.width - 1) / 2.0, (cfg.height - 1) / 2.0])
    if cfg.rotation:
        a = cfg.rotation * k
        rot = np.array([[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]])
        c = (c - mid) @ rot.T + mid
    return c + k * np.asarray(cfg.velocity, dtype=float)


def spawn_blobs(cfg: SynthConfig) -> list[Blob]:
    """Cells are spawned over the domain extended upstream so inflow stays populated."""
    rng = np.random.default_rng(cfg.seed)
    reach = float(np.hypot(*cfg.velocity)) * cfg.frames + 3 * cfg.sigma[1]
    if cfg.rotation:
        reach += abs(cfg.rotation) * cfg.frames * max(cfg.width, cfg.height)
    vx, vy = cfg.velocity
    x0 = -3 * cfg.sigma[1] - (reach if vx > 0 or cfg.rotation else 0.0)
    x1 = cfg.width + 3 * cfg.sigma[1] + (reach if vx < 0 or cfg.rotation else 0.0)
    y0 = -3 * cfg.sigma[1] - (reach if vy > 0 or cfg.rotation else 0.0)
    y1 = cfg.height + 3 * cfg.sigma[1] + (reach if vy < 0 or cfg.rotation else 0.0)
    # Keep density per unit area fixed at the nominal count over the image.
    area_ratio = (x1 - x0) * (y1 - y0) / (cfg.width * cfg.height)
    count = int(round(cfg.blobs * area_ratio))
    xs = rng.uniform(x0, x1, count)
    ys = rng.uniform(y0, y1, count)
    amps = rng.uniform(*cfg.amplitude, count)
    sig = rng.uniform(*cfg.sigma, count)
    return [Blob(float(a), float(b), float(c), float(d)) for a, b, c, d in zip(xs, ys, amps, sig)]


def render(blobs: list[Blob], cfg: SynthConfig, k: int) -> np.ndarray:
    centres = blob_centres(blobs, cfg, k)
    xs = np.arange(cfg.width, dtype=float)
    ys = np.arange(cfg.height, dtype=float)
    out = np.zeros((cfg.height, cfg.width))
    for (cx, cy), b in zip(centres, blobs):
        cut = 4.0 * b.sigma
        if cx < -cut or cx > cfg.width + cut or cy < -cut or cy > cfg.height + cut:
            continue
        gx = np.exp(-0.5 * ((xs - cx) / b.sigma) ** 2)
        gy = np.exp(-0.5 * ((ys - cy) / b.sigma) ** 2)
        out += b.amplitude * np.outer(gy, gx)
    return out


def synthesize_rasters(cfg: SynthConfig = SynthConfig()) -> RasterSequence:
    """Deterministic raster sequence for ``cfg`` (x is the column axis)."""
    if cfg.width < MIN_SIZE or cfg.height < MIN_SIZE:
        raise InvalidArgument(f"frames must be at least {MIN_SIZE}x{MIN_SIZE}")
    if cfg.frames < 1:
        raise InvalidArgument("need at least one frame")
    blobs = spawn_blobs(cfg)
    noise_rng = np.random.default_rng([cfg.seed, 1])
    frames = []
    for k in range(cfg.frames):
        f = render(blobs, cfg, k)
        if cfg.noise > 0:
            f = f + np.abs(noise_rng.normal(0.0, cfg.noise, f.shape))
        if cfg.quantize_max is not None:
            step = cfg.quantize_max / QUANT_LEVELS
            f = np.minimum(np.round(f / step), QUANT_LEVELS) * step
        frames.append(f)
    return RasterSequence(frames, cfg.dt)
