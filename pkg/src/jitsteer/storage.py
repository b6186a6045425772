"""File-backed persistence helpers.

Everything the engine persists is plain JSON under one data directory, with
atomic writes (tmp + rename) so a crash never leaves a half-written file.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path


class DataDir:
    """Layout of the engine's on-disk state."""

    def __init__(self, root: str | Path) -> None:
        self.root = Path(root)

    @property
    def snapshots(self) -> Path:
        return self.root / "snapshots"

    @property
    def objective_sets(self) -> Path:
        return self.root / "objective_sets"

    @property
    def sessions(self) -> Path:
        return self.root / "sessions"

    @property
    def jobs(self) -> Path:
        return self.root / "jobs"

    @property
    def runs(self) -> Path:
        return self.root / "runs"

    @property
    def call_log_path(self) -> Path:
        return self.root / "provider_calls.jsonl"

    def ensure(self) -> "DataDir":
        for p in (self.snapshots, self.objective_sets, self.sessions, self.jobs, self.runs):
            p.mkdir(parents=True, exist_ok=True)
        return self


def write_json_atomic(path: Path, value: object) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump(value, fh, indent=2, sort_keys=True)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_json(path: Path) -> object:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def canonical_json(value: object) -> str:
    """Stable serialization used for content hashing and byte comparisons."""
    return json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
