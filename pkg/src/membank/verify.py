"""Built-in oracle checks behind the `verify` CLI command.

Each check recomputes an expected answer through an independent route
(scalar loops, exhaustive enumeration) and compares it with the fast
path. These are quick smoke versions of the full test suite.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .activation import gated_attention, select_top_k
from .engine import Mode, full_memory_attention_oracle, rollout
from .frames import FrameKV, bank_new, bank_append
from .metrics import determinism_hash
from .retrieval import TextQuery, memory_update, text_relevance_scores
from .script import NarrativeScript, Segment
from .toymodel import ModelConfig

__all__ = ["run_all_checks"]


def _random_frames(rng, count, layers=2, heads=2, tokens=4, dim=8, start_id=0):
    out = []
    for i in range(count):
        k = rng.standard_normal((layers, heads, tokens, dim))
        v = rng.standard_normal((layers, heads, tokens, dim))
        out.append(FrameKV(frame_id=start_id + i, chunk_id=(start_id + i) // 3, k=k, v=v))
    return out


def check_gated_full_identity() -> bool:
    rng = np.random.default_rng(11)
    for _ in range(20):
        frames = _random_frames(rng, int(rng.integers(1, 6)))
        q = rng.standard_normal((5, 8))
        gated, act = gated_attention(q, frames, k=len(frames), layer=0, head=1)
        full = full_memory_attention_oracle(q, frames, [], layer=0, head=1, scale=1 / math.sqrt(8))
        if not np.allclose(gated, np.array(full), rtol=1e-9, atol=1e-12):
            return False
        if list(act.indices) != list(range(len(frames))):
            return False
    return True


def check_topk_optimality() -> bool:
    rng = np.random.default_rng(12)
    for _ in range(100):
        n = int(rng.integers(1, 9))
        scores = np.round(rng.standard_normal(n), 2).tolist()
        for k in range(1, n + 1):
            got = select_top_k(scores, k).indices
            best = max(
                itertools.combinations(range(n), k),
                key=lambda idx: (sum(scores[i] for i in idx), idx),
            )
            if tuple(got) != best:
                return False
    return True


def check_relevance_normalization() -> bool:
    rng = np.random.default_rng(13)
    tokens = 4
    for _ in range(20):
        frames = _random_frames(rng, int(rng.integers(1, 6)), tokens=tokens)
        bank = bank_new(8)
        for f in frames:
            bank = bank_append(bank, f)
        q = TextQuery(rng.standard_normal((2, 2, 8)))
        scores = text_relevance_scores(q, bank)
        if abs(scores.sum() - 1.0 / tokens) > 1e-9:
            return False
    return True


def check_capacity_invariant() -> bool:
    rng = np.random.default_rng(14)
    bank = bank_new(3)
    q = TextQuery(rng.standard_normal((2, 2, 8)))
    for step in range(50):
        chunk = _random_frames(rng, 3, start_id=step * 3)
        bank, _ = memory_update(bank, q, chunk)
        if len(bank) > 3 or bank.frames[-1].frame_id != chunk[0].frame_id:
            return False
    return True


def check_determinism() -> bool:
    script = NarrativeScript(
        seed=5,
        segments=(
            Segment("a river at dawn", 0, 2),
            Segment("a market street", 1, 2),
        ),
    )
    cfg = ModelConfig()
    a = rollout(script, cfg, Mode.NAM_SMA)
    b = rollout(script, cfg, Mode.NAM_SMA)
    return determinism_hash(a) == determinism_hash(b)


CHECKS = [
    ("gated_vs_full_identity", check_gated_full_identity),
    ("topk_matches_enumeration", check_topk_optimality),
    ("relevance_score_normalization", check_relevance_normalization),
    ("bank_capacity_invariant", check_capacity_invariant),
    ("rollout_determinism", check_determinism),
]


def run_all_checks(report=print) -> bool:
    ok = True
    for name, fn in CHECKS:
        passed = fn()
        ok = ok and passed
        report(f"{'PASS' if passed else 'FAIL'}  {name}")
    return ok
