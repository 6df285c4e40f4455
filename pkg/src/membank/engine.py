"""Streaming rollout over chunks: retrieval, bank update, sparse
activation, extended-window attention, and local-window roll.

Per chunk the phases run in a fixed order: the incoming prompt retrieves
and updates the bank first, then the candidate memory pool is assembled
(mode dependent), then each layer attends over [selected memory] ++
[local window] ++ [intra-chunk causal] keys, and finally the local window
rolls forward. The first chunk additionally seeds the write-once sink.
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .activation import ActivationSet, select_top_k
from .errors import ScriptError, ShapeError
from .frames import FrameKV, FrameSink, MemoryBank, bank_new
from .retrieval import TextQuery, memory_update
from .script import NarrativeScript
from .toymodel import (
    ModelConfig,
    Weights,
    encode_prompt,
    init_weights,
    make_topic_space,
    project_kv,
    project_queries,
    synth_chunk,
)

__all__ = [
    "Mode",
    "RolloutState",
    "ChunkResult",
    "RolloutRun",
    "initial_state",
    "step_chunk",
    "rollout",
    "full_memory_attention_oracle",
]


class Mode(enum.Enum):
    NO_MEMORY = "no_memory"
    FRAME_SINK = "frame_sink"
    NAM_FULL = "nam_full"
    NAM_SMA = "nam_sma"

    @property
    def uses_bank(self) -> bool:
        return self in (Mode.NAM_FULL, Mode.NAM_SMA)


@dataclass(frozen=True)
class RolloutState:
    chunk_counter: int
    sink: FrameSink
    bank: MemoryBank
    local_window: tuple[FrameKV, ...]
    prev_chunk: tuple[FrameKV, ...]
    mode: Mode


@dataclass
class ChunkResult:
    chunk_id: int
    attention_outputs: list[np.ndarray]  # per layer, [T, H, P, d]
    activation_sets: list[Optional[ActivationSet]]  # per layer
    attended_key_count: int
    wall_time: dict[str, float]
    retained_bank_ids: list[int]
    pre_update_bank_ids: list[int]
    selected_frame_ids: list[list[int]]  # per layer


@dataclass
class RolloutRun:
    mode: Mode
    cfg: ModelConfig
    script: NarrativeScript
    results: list[ChunkResult]
    elapsed_seconds: float


def initial_state(cfg: ModelConfig, mode: Mode) -> RolloutState:
    return RolloutState(
        chunk_counter=0,
        sink=FrameSink(),
        bank=bank_new(cfg.bank_capacity),
        local_window=(),
        prev_chunk=(),
        mode=mode,
    )


def _layer_activation(
    queries: np.ndarray, pool: Sequence[FrameKV], layer: int, k: int
) -> ActivationSet:
    """Top-k selection for one layer from head-averaged descriptors.

    One selection per (chunk, layer), shared by every head of the layer,
    keeping the attended-frame accounting head-independent.
    """
    qd = queries[:, layer].mean(axis=(0, 2))  # [H, d] averaged over frames/tokens
    qd = qd.mean(axis=0)
    scores = []
    for f in pool:
        kd = f.k[layer].mean(axis=1).mean(axis=0)  # heads x tokens pooled
        scores.append(float(qd @ kd))
    return select_top_k(scores, k)


def step_chunk(
    state: RolloutState,
    prompt: TextQuery,
    chunk,
    cfg: ModelConfig,
    weights: Weights,
) -> tuple[RolloutState, ChunkResult]:
    """Run one generation iteration; returns the advanced state and the
    per-chunk record."""
    mode = state.mode
    bank = state.bank
    wall: dict[str, float] = {}

    pre_update_ids = [f.frame_id for f in bank.frames]
    retained_ids: list[int] = []
    t0 = time.perf_counter()
    if mode.uses_bank and state.prev_chunk:
        bank, retained_ids = memory_update(bank, prompt, state.prev_chunk)
    wall["retrieval_update"] = time.perf_counter() - t0

    frames = project_kv(chunk, cfg, weights)
    queries = project_queries(chunk, cfg, weights)  # [T, L, H, P, d]
    scale = 1.0 / math.sqrt(cfg.head_dim)

    t0 = time.perf_counter()
    if mode is Mode.NO_MEMORY:
        pool: tuple[FrameKV, ...] = ()
    elif mode is Mode.FRAME_SINK:
        pool = state.sink.frames
    else:
        pool = state.sink.frames + bank.frames

    activation_sets: list[Optional[ActivationSet]] = [None] * cfg.layers
    selected: list[tuple[FrameKV, ...]] = [pool] * cfg.layers
    selected_ids: list[list[int]] = [[f.frame_id for f in pool]] * cfg.layers
    if mode is Mode.NAM_SMA and pool:
        activation_sets = []
        selected = []
        selected_ids = []
        for l in range(cfg.layers):
            act = _layer_activation(queries, pool, l, cfg.sma_k)
            activation_sets.append(act)
            chosen = tuple(pool[i] for i in act.indices)
            selected.append(chosen)
            selected_ids.append([f.frame_id for f in chosen])
    wall["selection"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    T, P, d = cfg.frames_per_chunk, cfg.tokens_per_frame, cfg.head_dim
    attended = 0
    outputs = []
    for l in range(cfg.layers):
        out_l = np.empty((T, cfg.heads, P, d))
        mem = selected[l]
        for h in range(cfg.heads):
            mem_k = [f.keys_at(l, h) for f in mem] + [
                f.keys_at(l, h) for f in state.local_window
            ]
            mem_v = [f.values_at(l, h) for f in mem] + [
                f.values_at(l, h) for f in state.local_window
            ]
            for i in range(T):
                k_cat = np.concatenate(
                    mem_k + [fr.keys_at(l, h) for fr in frames[: i + 1]], axis=0
                )
                v_cat = np.concatenate(
                    mem_v + [fr.values_at(l, h) for fr in frames[: i + 1]], axis=0
                )
                q_i = queries[i, l, h]
                logits = q_i @ k_cat.T * scale
                logits -= logits.max(axis=1, keepdims=True)
                w = np.exp(logits)
                w /= w.sum(axis=1, keepdims=True)
                out_l[i, h] = w @ v_cat
                attended += q_i.shape[0] * k_cat.shape[0]
        outputs.append(out_l)
    wall["attention"] = time.perf_counter() - t0

    if state.chunk_counter == 0:
        state.sink.set(frames)
    new_window = (state.local_window + tuple(frames))[-cfg.local_window :]

    result = ChunkResult(
        chunk_id=chunk.chunk_id,
        attention_outputs=outputs,
        activation_sets=activation_sets,
        attended_key_count=attended,
        wall_time=wall,
        retained_bank_ids=retained_ids,
        pre_update_bank_ids=pre_update_ids,
        selected_frame_ids=selected_ids,
    )
    new_state = replace(
        state,
        chunk_counter=state.chunk_counter + 1,
        bank=bank,
        local_window=new_window,
        prev_chunk=tuple(frames),
    )
    return new_state, result


def rollout(
    script: NarrativeScript,
    cfg: ModelConfig,
    mode: Mode,
    noise_eps: float = 0.05,
) -> RolloutRun:
    """Run a full multi-segment script and collect per-chunk records.

    The script's seed drives all synthesis; prompts switch at segment
    boundaries.
    """
    if not script.segments:
        raise ScriptError("empty script")
    cfg = replace(cfg, seed=script.seed)
    weights = init_weights(cfg)
    space = make_topic_space(script.num_topics, cfg, noise_eps)
    state = initial_state(cfg, mode)
    results: list[ChunkResult] = []
    started = time.perf_counter()
    chunk_id = 0
    for seg in script.segments:
        prompt = encode_prompt(seg.prompt_text, seg.topic, cfg, space, weights)
        for _ in range(seg.chunks):
            chunk = synth_chunk(seg.topic, chunk_id, cfg, space)
            state, res = step_chunk(state, prompt, chunk, cfg, weights)
            results.append(res)
            chunk_id += 1
    elapsed = time.perf_counter() - started
    return RolloutRun(mode=mode, cfg=cfg, script=script, results=results, elapsed_seconds=elapsed)


def full_memory_attention_oracle(
    q_vis,
    pool: Sequence[FrameKV],
    local: Sequence[FrameKV],
    layer: int,
    head: int,
    scale: float,
) -> list[list[float]]:
    """Unrestricted attention over pool ++ local, scalar loops only.

    Independent of the numpy kernels; used to cross-check the gated path.
    """
    keys: list[list[float]] = []
    vals: list[list[float]] = []
    for f in list(pool) + list(local):
        km = f.keys_at(layer, head)
        vm = f.values_at(layer, head)
        for r in range(km.shape[0]):
            keys.append([float(x) for x in km[r]])
            vals.append([float(x) for x in vm[r]])
    q = [[float(x) for x in row] for row in np.asarray(q_vis)]
    if not keys:
        raise ShapeError("oracle needs at least one key")
    dim_v = len(vals[0])
    out = []
    for qrow in q:
        logits = []
        for krow in keys:
            s = 0.0
            for a, b in zip(qrow, krow):
                s += a * b
            logits.append(s * scale)
        m = max(logits)
        exps = [math.exp(x - m) for x in logits]
        z = sum(exps)
        row = [0.0] * dim_v
        for w, vrow in zip(exps, vals):
            p = w / z
            for j in range(dim_v):
                row[j] += p * vrow[j]
        out.append(row)
    return out
