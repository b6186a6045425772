"""Deterministic transcript-replaying provider for offline tests.

A transcript is an ordered list of (matcher, response) entries. In "ordered"
mode responses are consumed strictly in sequence (each entry's matcher, if
any, must match the arriving prompt); in "matched" mode each request consumes
the first unconsumed entry whose matcher matches. Either way, identical
request sequences yield identical response sequences.
"""

from __future__ import annotations

import json
import re
import threading
import time
from dataclasses import dataclass
from pathlib import Path

from .errors import TranscriptExhausted, TranscriptMismatch
from .gateway import Part, RoleConfig, assemble_prompt_text


@dataclass(frozen=True)
class TranscriptEntry:
    match: str = ""
    response: str = ""
    regex: bool = False

    def matches(self, prompt: str) -> bool:
        if not self.match:
            return True
        if self.regex:
            return re.search(self.match, prompt) is not None
        return self.match in prompt


@dataclass
class ScriptedTranscript:
    entries: list[TranscriptEntry]
    strictness: str = "ordered"

    def __post_init__(self) -> None:
        if self.strictness not in ("ordered", "matched"):
            raise ValueError(f"unknown strictness {self.strictness!r}")

    @classmethod
    def from_file(cls, path: str | Path, strictness: str | None = None) -> "ScriptedTranscript":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        if isinstance(raw, dict):
            entries = raw.get("entries", [])
            strictness = strictness or raw.get("strictness", "ordered")
        else:
            entries = raw
        return cls(
            entries=[
                TranscriptEntry(
                    match=e.get("match", ""),
                    response=e.get("response", ""),
                    regex=bool(e.get("regex", False)),
                )
                for e in entries
            ],
            strictness=strictness or "ordered",
        )


class ScriptedProvider:
    """Replays a transcript; records every assembled prompt it receives."""

    def __init__(self, transcript: ScriptedTranscript, delay_s: float = 0.0) -> None:
        self.transcript = transcript
        self.delay_s = delay_s
        self.requests: list[str] = []
        self._lock = threading.Lock()
        self._cursor = 0
        self._consumed: set[int] = set()

    @classmethod
    def from_file(cls, path: str | Path, strictness: str | None = None) -> "ScriptedProvider":
        return cls(ScriptedTranscript.from_file(path, strictness=strictness))

    @classmethod
    def from_responses(cls, responses: list[str], strictness: str = "ordered") -> "ScriptedProvider":
        entries = [TranscriptEntry(response=r) for r in responses]
        return cls(ScriptedTranscript(entries=entries, strictness=strictness))

    @classmethod
    def from_pairs(cls, pairs: list[tuple[str, str]], strictness: str = "matched") -> "ScriptedProvider":
        entries = [TranscriptEntry(match=m, response=r) for m, r in pairs]
        return cls(ScriptedTranscript(entries=entries, strictness=strictness))

    def reset(self) -> None:
        with self._lock:
            self._cursor = 0
            self._consumed.clear()
            self.requests.clear()

    def generate(self, system_text: str, parts: tuple[Part, ...], cfg: RoleConfig) -> str:
        prompt = assemble_prompt_text(system_text, parts)
        with self._lock:
            self.requests.append(prompt)
            response = self._consume(prompt)
        # Sleep outside the lock so matched-mode transcripts can exercise
        # real concurrency in cap tests.
        delay = self.delay_s or cfg.delay_s
        if delay:
            time.sleep(delay)
        return response

    def _consume(self, prompt: str) -> str:
        entries = self.transcript.entries
        if self.transcript.strictness == "ordered":
            if self._cursor >= len(entries):
                raise TranscriptExhausted(
                    f"ordered transcript exhausted after {len(entries)} responses"
                )
            entry = entries[self._cursor]
            if not entry.matches(prompt):
                raise TranscriptMismatch(
                    f"transcript entry {self._cursor} expects {entry.match!r}; "
                    f"prompt begins {prompt[:120]!r}"
                )
            self._cursor += 1
            return entry.response
        for i, entry in enumerate(entries):
            if i in self._consumed:
                continue
            if entry.matches(prompt):
                self._consumed.add(i)
                return entry.response
        raise TranscriptExhausted(
            f"no unconsumed transcript entry matches prompt beginning {prompt[:120]!r}"
        )
