"""Frame-level KV storage: single frames, the capacity-bounded bank, and
the write-once sink holding the first generated chunk.

A frame stores its key/value projections for every (layer, head) as two
arrays of shape [L, H, P, d]. Banks are immutable snapshots; updates
return new banks.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .errors import CapacityError, ConfigError, EmptyMemoryError, ShapeError, SinkAlreadySetError

__all__ = ["FrameKV", "MemoryBank", "FrameSink", "bank_new", "bank_retain", "bank_append"]


@dataclass(frozen=True)
class FrameKV:
    """KV cache of a single latent frame across all layers and heads.

    k and v are float64 arrays of shape [L, H, P, d]; P is tokens per
    frame. topic_label exists only for oracle evaluation and must never
    influence retrieval or attention.
    """

    frame_id: int
    chunk_id: int
    k: np.ndarray
    v: np.ndarray
    topic_label: Optional[int] = None

    def __post_init__(self):
        if self.k.ndim != 4 or self.v.ndim != 4:
            raise ShapeError("frame k/v must be [L, H, P, d] arrays")
        if self.k.shape != self.v.shape:
            raise ShapeError(f"k shape {self.k.shape} != v shape {self.v.shape}")
        self.k.setflags(write=False)
        self.v.setflags(write=False)

    def keys_at(self, layer: int, head: int) -> np.ndarray:
        return self.k[layer, head]

    def values_at(self, layer: int, head: int) -> np.ndarray:
        return self.v[layer, head]


@dataclass(frozen=True)
class MemoryBank:
    """Ordered, capacity-bounded collection of frames, oldest first."""

    capacity: int
    frames: tuple[FrameKV, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.capacity < 1:
            raise ConfigError(f"bank capacity must be >= 1, got {self.capacity}")
        if len(self.frames) > self.capacity:
            raise CapacityError(
                f"{len(self.frames)} frames exceed capacity {self.capacity}"
            )
        ids = [f.frame_id for f in self.frames]
        if any(a >= b for a, b in zip(ids, ids[1:])):
            raise ShapeError(f"frame_ids must be strictly increasing, got {ids}")

    def __len__(self) -> int:
        return len(self.frames)


def bank_new(capacity: int) -> MemoryBank:
    return MemoryBank(capacity=capacity)


def bank_retain(bank: MemoryBank, indices: Sequence[int]) -> MemoryBank:
    """New bank holding exactly the indexed frames, original order kept."""
    for i in indices:
        if not 0 <= i < len(bank.frames):
            raise IndexError(f"retain index {i} out of range for bank of {len(bank)}")
    kept = tuple(bank.frames[i] for i in sorted(set(indices)))
    return replace(bank, frames=kept)


def bank_append(bank: MemoryBank, frame: FrameKV) -> MemoryBank:
    """Append a frame at the end; callers must retain first if full."""
    if len(bank) >= bank.capacity:
        raise CapacityError(
            f"bank already holds {len(bank)} of {bank.capacity} frames"
        )
    return replace(bank, frames=bank.frames + (frame,))


class FrameSink:
    """Write-once holder for the first chunk's frames."""

    def __init__(self):
        self._frames: Optional[tuple[FrameKV, ...]] = None

    @property
    def is_set(self) -> bool:
        return self._frames is not None

    @property
    def frames(self) -> tuple[FrameKV, ...]:
        return self._frames if self._frames is not None else ()

    def set(self, chunk_frames: Sequence[FrameKV]) -> "FrameSink":
        if self._frames is not None:
            raise SinkAlreadySetError("frame sink is write-once")
        if not chunk_frames:
            raise EmptyMemoryError("frame sink needs at least one frame")
        self._frames = tuple(chunk_frames)
        return self
