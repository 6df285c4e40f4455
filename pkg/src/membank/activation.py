"""Relevance-gated sparse activation of memory frames.

Each candidate frame is condensed to a single key descriptor (mean over
its tokens); the current chunk's queries are condensed the same way. The
inner product of the two descriptors scores each frame, the top-k frames
are kept, and attention runs over the concatenated KV of the kept frames
only. Dropped attention mass is not renormalized beyond the softmax over
the kept keys.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, EmptyMemoryError, ShapeError
from .frames import FrameKV
from .linalg import mean_pool_rows, sdp_attention

__all__ = [
    "ActivationSet",
    "query_descriptor",
    "frame_descriptors",
    "relevance",
    "select_top_k",
    "gated_attention",
]


@dataclass(frozen=True)
class ActivationSet:
    """Selected candidate indices (ascending) with their scores."""

    indices: tuple[int, ...]
    scores: tuple[float, ...]


def query_descriptor(q_vis: np.ndarray) -> np.ndarray:
    """Condense a chunk's queries to one vector by token mean pooling."""
    return mean_pool_rows(q_vis)


def frame_descriptors(
    candidates: Sequence[FrameKV], layer: int, head: int
) -> list[np.ndarray]:
    """One mean-pooled key descriptor per candidate frame, order kept."""
    if not candidates:
        raise EmptyMemoryError("no candidate frames to describe")
    return [mean_pool_rows(f.keys_at(layer, head)) for f in candidates]


def relevance(qd: np.ndarray, kd: np.ndarray) -> float:
    if qd.shape != kd.shape:
        raise ShapeError(f"descriptor dims differ: {qd.shape} vs {kd.shape}")
    return float(qd @ kd)


def select_top_k(scores: Sequence[float], k: int) -> ActivationSet:
    """Indices of the k highest scores; ties favor the later frame.

    Equals the size-k subset maximizing the score sum under that tie rule.
    """
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    scores = [float(s) for s in scores]
    k = min(k, len(scores))
    ranked = sorted(range(len(scores)), key=lambda i: (-scores[i], -i))
    picked = sorted(ranked[:k])
    return ActivationSet(tuple(picked), tuple(scores[i] for i in picked))


def gated_attention(
    q_vis: np.ndarray,
    candidates: Sequence[FrameKV],
    k: int,
    layer: int,
    head: int,
    scale: Optional[float] = None,
    activation: Optional[ActivationSet] = None,
) -> tuple[np.ndarray, ActivationSet]:
    """Attention over the top-k relevant candidate frames only.

    A precomputed activation set (e.g. one shared across the heads of a
    layer) may be passed in; otherwise selection is scored from this
    head's descriptors. With k >= len(candidates) this reduces exactly to
    attention over the full pool in frame order.
    """
    if not candidates:
        raise EmptyMemoryError("no candidate frames to attend over")
    if activation is None:
        qd = query_descriptor(q_vis)
        kds = frame_descriptors(candidates, layer, head)
        activation = select_top_k([relevance(qd, kd) for kd in kds], k)
    k_sel = np.concatenate(
        [candidates[i].keys_at(layer, head) for i in activation.indices], axis=0
    )
    v_sel = np.concatenate(
        [candidates[i].values_at(layer, head) for i in activation.indices], axis=0
    )
    return sdp_attention(q_vis, k_sel, v_sel, scale), activation
