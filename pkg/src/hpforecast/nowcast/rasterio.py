"""Raster files: one text header line, then little-endian float32 frames (row-major)."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from ..errors import InvalidArgument
from .synth import RasterSequence

_DTYPE = np.dtype("<f4")


def dumps_raster(seq: RasterSequence) -> bytes:
    h, w = seq.shape
    header = f"width={w} height={h} frames={len(seq)} dt={seq.dt!r}\n".encode("ascii")
    return header + seq.array().astype(_DTYPE).tobytes(order="C")


def loads_raster(data: bytes) -> RasterSequence:
    head, sep, payload = data.partition(b"\n")
    if not sep:
        raise InvalidArgument("raster file has no header line")
    try:
        fields = dict(item.split("=", 1) for item in head.decode("ascii").split())
        w, h, n = int(fields["width"]), int(fields["height"]), int(fields["frames"])
        dt = float(fields["dt"])
    except (KeyError, ValueError, UnicodeDecodeError) as exc:
        raise InvalidArgument(f"malformed raster header {head[:80]!r}") from exc
    expected = w * h * n * _DTYPE.itemsize
    if len(payload) != expected:
        raise InvalidArgument(f"raster payload has {len(payload)} bytes, expected {expected}")
    arr = np.frombuffer(payload, dtype=_DTYPE).reshape(n, h, w).astype(float)
    return RasterSequence(list(arr), dt)


def write_raster(path, seq: RasterSequence) -> None:
    Path(path).write_bytes(dumps_raster(seq))


def read_raster(path) -> RasterSequence:
    return loads_raster(Path(path).read_bytes())
