"""Coded-snapshot acquisition with a periodically tiled patch mask."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .coherence import CodeMask
from .errors import DimensionError


@dataclass(frozen=True, eq=False)
class FrameStack:
    """``T`` frames of equal size (video frames, or R, G, B planes)."""

    frames: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.frames, dtype=float)
        if f.ndim == 2:
            f = f[None]
        if f.ndim != 3:
            raise DimensionError(f"frames must have shape (T, N1, N2), got {f.shape}")
        object.__setattr__(self, "frames", f)

    @property
    def T(self) -> int:
        return self.frames.shape[0]

    @property
    def shape(self):
        return self.frames.shape[1:]


@dataclass(frozen=True, eq=False)
class TiledCode:
    """Full-resolution code: ``values[t, r, c] = mask[t, r % m, c % m]``."""

    values: np.ndarray
    m: int

    @property
    def T(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True, eq=False)
class Snapshot:
    y: np.ndarray
    meta: dict = field(default_factory=dict)


def tile(mask: CodeMask, N1: int, N2: int) -> TiledCode:
    m = mask.side
    if N1 < m or N2 < m:
        raise DimensionError(f"image {N1}x{N2} is smaller than the {m}x{m} mask")
    reps = (1, -(-N1 // m), -(-N2 // m))
    values = np.tile(mask.values, reps)[:, :N1, :N2]
    return TiledCode(values=np.ascontiguousarray(values), m=m)


def quantize(y: np.ndarray, T: int, levels: int = 256) -> np.ndarray:
    """Uniform quantization of ``[0, T]`` to ``levels`` values, returned in the same units."""
    step = T / (levels - 1)
    return np.clip(np.round(y / step), 0, levels - 1) * step


def acquire(frames: FrameStack, code: TiledCode, mask: CodeMask | None = None,
            quantize_bits: int | None = None) -> Snapshot:
    """Per-pixel coded sum of the frames."""
    if code.values.shape != frames.frames.shape:
        raise DimensionError(
            f"code shape {code.values.shape} does not match frames {frames.frames.shape}"
        )
    y = np.zeros(frames.shape)
    for t in range(frames.T):
        y += code.values[t] * frames.frames[t]
    if quantize_bits:
        y = quantize(y, frames.T, 2 ** quantize_bits)
    meta = {"m": code.m, "T": code.T}
    if mask is not None:
        meta["mask"] = mask.digest()
    return Snapshot(y=y, meta=meta)


def patch_code(code: TiledCode, r: int, c: int, m: int | None = None) -> np.ndarray:
    """The ``(T, m, m)`` code seen by the patch with top-left corner ``(r, c)``."""
    m = code.m if m is None else m
    _, N1, N2 = code.values.shape
    if r < 0 or c < 0 or r + m > N1 or c + m > N2:
        raise IndexError(f"patch at ({r}, {c}) of size {m} exceeds image {N1}x{N2}")
    return code.values[:, r:r + m, c:c + m].copy()


def patch_positions(N: int, m: int, stride: int) -> list:
    """Patch corners along one axis: the stride grid plus the last corner
    so every pixel is covered."""
    pos = list(range(0, N - m + 1, stride))
    if pos[-1] != N - m:
        pos.append(N - m)
    return pos
