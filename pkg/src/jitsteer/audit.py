"""Provider-call audit trail.

Every physical provider call the gateway makes is recorded here, tagged with
the job that caused it (via a contextvar the job runner sets). The log is an
append-only JSON-lines file plus an in-memory mirror for tests and the
service's per-job audit view.
"""

from __future__ import annotations

import contextvars
import json
import threading
import time
from dataclasses import asdict, dataclass
from pathlib import Path

current_job_id: contextvars.ContextVar[str | None] = contextvars.ContextVar(
    "current_job_id", default=None
)


@dataclass(frozen=True)
class CallRecord:
    job_id: str | None
    role: str
    prompt_hash: str
    prompt: str
    response_hash: str
    attempt: int
    ts: float


class CallLog:
    """Thread-safe provider-call log, optionally backed by a jsonl file."""

    def __init__(self, path: Path | None = None) -> None:
        self.path = Path(path) if path else None
        self._lock = threading.Lock()
        self._records: list[CallRecord] = []

    def record(self, record: CallRecord) -> None:
        with self._lock:
            self._records.append(record)
            if self.path:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with self.path.open("a", encoding="utf-8") as fh:
                    fh.write(json.dumps(asdict(record)) + "\n")

    def records(self, job_id: str | None = None) -> list[CallRecord]:
        with self._lock:
            if job_id is None:
                return list(self._records)
            return [r for r in self._records if r.job_id == job_id]

    @staticmethod
    def make(job_id: str | None, role: str, prompt_hash: str, prompt: str,
             response_hash: str, attempt: int) -> CallRecord:
        return CallRecord(
            job_id=job_id,
            role=role,
            prompt_hash=prompt_hash,
            prompt=prompt,
            response_hash=response_hash,
            attempt=attempt,
            ts=time.time(),
        )
