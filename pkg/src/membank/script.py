"""Narrative scripts: multi-segment prompt schedules with planted topics.

File format is JSON: {"seed": int, "segments": [{"prompt_text": str,
"topic": int, "chunks": int}, ...]}.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import ScriptError

__all__ = ["Segment", "NarrativeScript", "parse_script", "script_from_dict"]


@dataclass(frozen=True)
class Segment:
    prompt_text: str
    topic: int
    chunks: int


@dataclass(frozen=True)
class NarrativeScript:
    seed: int
    segments: tuple[Segment, ...]

    def __post_init__(self):
        if not self.segments:
            raise ScriptError("script needs at least one segment")

    @property
    def total_chunks(self) -> int:
        return sum(s.chunks for s in self.segments)

    @property
    def num_topics(self) -> int:
        return max(s.topic for s in self.segments) + 1

    def topic_of_chunk(self, chunk_id: int) -> int:
        """Planted topic of a global chunk index."""
        offset = 0
        for seg in self.segments:
            if chunk_id < offset + seg.chunks:
                return seg.topic
            offset += seg.chunks
        raise ScriptError(f"chunk {chunk_id} beyond script length {offset}")


def script_from_dict(doc: dict) -> NarrativeScript:
    if not isinstance(doc, dict):
        raise ScriptError("script root must be a JSON object")
    try:
        seed = doc["seed"]
        raw_segments = doc["segments"]
    except KeyError as e:
        raise ScriptError(f"script is missing required field {e}") from e
    if not isinstance(seed, int):
        raise ScriptError(f"seed must be an integer, got {type(seed).__name__}")
    if not isinstance(raw_segments, list) or not raw_segments:
        raise ScriptError("segments must be a nonempty list")
    segments = []
    for i, raw in enumerate(raw_segments):
        if not isinstance(raw, dict):
            raise ScriptError(f"segment {i} must be an object")
        for key, typ in (("prompt_text", str), ("topic", int), ("chunks", int)):
            if key not in raw:
                raise ScriptError(f"segment {i} is missing field '{key}'")
            if not isinstance(raw[key], typ):
                raise ScriptError(
                    f"segment {i} field '{key}' must be {typ.__name__}"
                )
        if raw["topic"] < 0:
            raise ScriptError(f"segment {i}: topic must be >= 0")
        if raw["chunks"] < 1:
            raise ScriptError(f"segment {i}: chunks must be >= 1")
        if not raw["prompt_text"].strip():
            raise ScriptError(f"segment {i}: prompt_text is empty")
        segments.append(
            Segment(prompt_text=raw["prompt_text"], topic=raw["topic"], chunks=raw["chunks"])
        )
    return NarrativeScript(seed=seed, segments=tuple(segments))


def parse_script(path) -> NarrativeScript:
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScriptError(f"{path}: invalid JSON at line {e.lineno}: {e.msg}") from e
    try:
        return script_from_dict(doc)
    except ScriptError as e:
        raise ScriptError(f"{path}: {e}") from e
