"""User-context snapshots and the objective types they give rise to.

A ContextSnapshot is one normalized capture of what the user was working on:
extracted/pasted text, an optional screenshot, optional attachments. Snapshot
ids are content-addressed so replays and caches are deterministic.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

from .errors import EmptyContext, EmptySet, ObjectiveValidationFailure, OversizedAttachment
from .gateway import ImagePart, Part, TextPart
from .storage import read_json, write_json_atomic

TEXT_HEAD_CHARS = 40_000
TEXT_TAIL_CHARS = 10_000
TRUNCATION_MARKER = "\n[…truncated…]\n"
ATTACHMENT_BYTE_CAP = 8 * 1024 * 1024
ATTACHMENT_COUNT_CAP = 5

MAX_NAME_CHARS = 120
MAX_DESCRIPTION_CHARS = 600
MIN_WEIGHT, MAX_WEIGHT = 1, 10


@dataclass(frozen=True)
class Attachment:
    filename: str
    media_type: str
    data: bytes


@dataclass(frozen=True)
class ContextSnapshot:
    snapshot_id: str
    text_content: str | None = None
    image: bytes | None = None
    image_media_type: str = ""
    attachments: tuple[Attachment, ...] = ()
    source_hint: str | None = None
    captured_at: float = 0.0
    truncated: bool = False


def _truncate(text: str) -> tuple[str, bool]:
    if len(text) <= TEXT_HEAD_CHARS + TEXT_TAIL_CHARS:
        return text, False
    return text[:TEXT_HEAD_CHARS] + TRUNCATION_MARKER + text[-TEXT_TAIL_CHARS:], True


def _content_hash(text: str | None, image: bytes | None, image_media_type: str,
                  attachments: tuple[Attachment, ...], source_hint: str | None) -> str:
    h = hashlib.sha256()
    h.update((text or "").encode("utf-8"))
    h.update(b"\x00")
    h.update(image or b"")
    h.update(image_media_type.encode("utf-8"))
    for att in attachments:
        h.update(b"\x00" + att.filename.encode("utf-8"))
        h.update(att.media_type.encode("utf-8"))
        h.update(att.data)
    h.update(b"\x00" + (source_hint or "").encode("utf-8"))
    return h.hexdigest()


def ingest(
    text: str | None = None,
    image: bytes | None = None,
    image_media_type: str = "image/png",
    attachments: list[Attachment] | None = None,
    source_hint: str | None = None,
    captured_at: float = 0.0,
) -> ContextSnapshot:
    """Normalize raw user input into a snapshot.

    Text is trimmed and, past the head+tail budget, truncated with an
    explicit marker. At least one content field must be present.
    """
    attachments = attachments or []
    if text is not None:
        text = text.strip()
        if not text:
            text = None
    if text is None and image is None and not attachments:
        raise EmptyContext("snapshot needs text, an image, or attachments")
    if len(attachments) > ATTACHMENT_COUNT_CAP:
        raise OversizedAttachment(
            f"{len(attachments)} attachments exceeds the cap of {ATTACHMENT_COUNT_CAP}"
        )
    for att in attachments:
        if len(att.data) > ATTACHMENT_BYTE_CAP:
            raise OversizedAttachment(
                f"attachment '{att.filename}' is {len(att.data)} bytes "
                f"(cap {ATTACHMENT_BYTE_CAP})"
            )
    truncated = False
    if text is not None:
        text, truncated = _truncate(text)
    atts = tuple(attachments)
    snapshot_id = _content_hash(text, image, image_media_type if image else "", atts, source_hint)
    return ContextSnapshot(
        snapshot_id=snapshot_id,
        text_content=text,
        image=image,
        image_media_type=image_media_type if image else "",
        attachments=atts,
        source_hint=source_hint,
        captured_at=captured_at,
        truncated=truncated,
    )


_TEXTUAL_MEDIA_PREFIXES = ("text/",)
_TEXTUAL_MEDIA_TYPES = {"application/json", "application/xml"}


def _attachment_is_textual(att: Attachment) -> bool:
    return att.media_type in _TEXTUAL_MEDIA_TYPES or att.media_type.startswith(_TEXTUAL_MEDIA_PREFIXES)


def render_context_block(snapshot: ContextSnapshot) -> tuple[Part, ...]:
    """Deterministic serialization of a snapshot into ordered prompt parts:
    source-hint line, then text content, then image part(s)."""
    lines: list[str] = []
    if snapshot.source_hint:
        lines.append(f"Source: {snapshot.source_hint}")
    if snapshot.text_content:
        lines.append(snapshot.text_content)
    for att in snapshot.attachments:
        if _attachment_is_textual(att):
            lines.append(f"[attachment: {att.filename}]")
            lines.append(att.data.decode("utf-8", errors="replace"))
    parts: list[Part] = []
    if lines:
        parts.append(TextPart("\n".join(lines)))
    if snapshot.image is not None:
        parts.append(ImagePart(data=snapshot.image, media_type=snapshot.image_media_type))
    for att in snapshot.attachments:
        if att.media_type.startswith("image/"):
            parts.append(ImagePart(data=att.data, media_type=att.media_type))
    return tuple(parts)


def context_block_text(snapshot: ContextSnapshot) -> str:
    """Text-only view of the context block, for substitution into templates.
    Image parts are carried separately on the completion request."""
    parts = render_context_block(snapshot)
    return "\n".join(p.text for p in parts if isinstance(p, TextPart))


def context_image_parts(snapshot: ContextSnapshot) -> tuple[Part, ...]:
    return tuple(p for p in render_context_block(snapshot) if isinstance(p, ImagePart))


# --- objectives -------------------------------------------------------------


@dataclass(frozen=True)
class Objective:
    name: str
    description: str
    weight: int

    def __post_init__(self) -> None:
        if not isinstance(self.weight, int) or isinstance(self.weight, bool):
            raise ObjectiveValidationFailure(f"weight must be an integer, got {self.weight!r}")
        if not (MIN_WEIGHT <= self.weight <= MAX_WEIGHT):
            raise ObjectiveValidationFailure(
                f"weight {self.weight} outside [{MIN_WEIGHT}, {MAX_WEIGHT}]"
            )
        if not self.name or not self.name.strip():
            raise ObjectiveValidationFailure("objective name is empty")
        if len(self.name) > MAX_NAME_CHARS:
            raise ObjectiveValidationFailure(
                f"objective name of {len(self.name)} chars exceeds {MAX_NAME_CHARS}"
            )
        if not self.description or not self.description.strip():
            raise ObjectiveValidationFailure("objective description is empty")
        if len(self.description) > MAX_DESCRIPTION_CHARS:
            raise ObjectiveValidationFailure(
                f"objective description of {len(self.description)} chars "
                f"exceeds {MAX_DESCRIPTION_CHARS}"
            )

    def to_dict(self) -> dict:
        return {"name": self.name, "description": self.description, "weight": self.weight}

    @classmethod
    def from_dict(cls, raw: dict) -> "Objective":
        return cls(
            name=str(raw.get("name", "")),
            description=str(raw.get("description", "")),
            weight=coerce_weight(raw.get("weight")),
        )


def coerce_weight(value: object) -> int:
    """Accept the integer-ish weights models actually emit (7, 7.0, "7");
    anything else fails objective validation."""
    if isinstance(value, bool):
        raise ObjectiveValidationFailure(f"weight must be an integer, got {value!r}")
    if isinstance(value, int):
        return value
    if isinstance(value, float) and value.is_integer():
        return int(value)
    if isinstance(value, str):
        stripped = value.strip()
        if stripped.lstrip("+-").isdigit():
            return int(stripped)
    raise ObjectiveValidationFailure(f"weight must be an integer, got {value!r}")


@dataclass(frozen=True)
class ObjectiveSet:
    """Objectives sorted by weight descending; ties keep model order."""

    objectives: tuple[Objective, ...]
    reasoning_trace: str
    source_snapshot: str
    set_id: str = ""

    def __post_init__(self) -> None:
        # Stable sort on weight descending preserves model order for ties.
        ordered = tuple(sorted(self.objectives, key=lambda o: -o.weight))
        object.__setattr__(self, "objectives", ordered)

    def top(self) -> Objective:
        if not self.objectives:
            raise EmptySet("objective set is empty")
        return self.objectives[0]

    def to_dict(self) -> dict:
        return {
            "set_id": self.set_id,
            "source_snapshot": self.source_snapshot,
            "reasoning": self.reasoning_trace,
            "objectives": [o.to_dict() for o in self.objectives],
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "ObjectiveSet":
        return cls(
            objectives=tuple(Objective.from_dict(o) for o in raw.get("objectives", [])),
            reasoning_trace=str(raw.get("reasoning", "")),
            source_snapshot=str(raw.get("source_snapshot", "")),
            set_id=str(raw.get("set_id", "")),
        )


# --- persistence ------------------------------------------------------------


class SnapshotStore:
    """Snapshots persisted as a directory per id: metadata JSON + raw blobs."""

    def __init__(self, root: str | Path) -> None:
        self.root = Path(root)

    def _dir(self, snapshot_id: str) -> Path:
        return self.root / snapshot_id

    def save(self, snapshot: ContextSnapshot) -> ContextSnapshot:
        d = self._dir(snapshot.snapshot_id)
        d.mkdir(parents=True, exist_ok=True)
        meta = {
            "snapshot_id": snapshot.snapshot_id,
            "text_content": snapshot.text_content,
            "image_media_type": snapshot.image_media_type,
            "has_image": snapshot.image is not None,
            "attachments": [
                {"filename": a.filename, "media_type": a.media_type, "blob": f"att_{i}"}
                for i, a in enumerate(snapshot.attachments)
            ],
            "source_hint": snapshot.source_hint,
            "captured_at": snapshot.captured_at,
            "truncated": snapshot.truncated,
        }
        if snapshot.image is not None:
            (d / "image").write_bytes(snapshot.image)
        for i, att in enumerate(snapshot.attachments):
            (d / f"att_{i}").write_bytes(att.data)
        write_json_atomic(d / "metadata.json", meta)
        return snapshot

    def exists(self, snapshot_id: str) -> bool:
        return (self._dir(snapshot_id) / "metadata.json").exists()

    def load(self, snapshot_id: str) -> ContextSnapshot:
        d = self._dir(snapshot_id)
        meta_path = d / "metadata.json"
        if not meta_path.exists():
            raise FileNotFoundError(f"no snapshot {snapshot_id}")
        meta = read_json(meta_path)
        assert isinstance(meta, dict)
        image = (d / "image").read_bytes() if meta.get("has_image") else None
        attachments = tuple(
            Attachment(
                filename=a["filename"],
                media_type=a["media_type"],
                data=(d / a["blob"]).read_bytes(),
            )
            for a in meta.get("attachments", [])
        )
        return ContextSnapshot(
            snapshot_id=meta["snapshot_id"],
            text_content=meta.get("text_content"),
            image=image,
            image_media_type=meta.get("image_media_type", ""),
            attachments=attachments,
            source_hint=meta.get("source_hint"),
            captured_at=meta.get("captured_at", 0.0),
            truncated=bool(meta.get("truncated", False)),
        )

    def list_ids(self) -> list[str]:
        if not self.root.exists():
            return []
        return sorted(p.name for p in self.root.iterdir() if (p / "metadata.json").exists())


class ObjectiveSetStore:
    def __init__(self, root: str | Path) -> None:
        self.root = Path(root)

    def save(self, objective_set: ObjectiveSet) -> ObjectiveSet:
        write_json_atomic(self.root / f"{objective_set.set_id}.json", objective_set.to_dict())
        return objective_set

    def load(self, set_id: str) -> ObjectiveSet:
        raw = read_json(self.root / f"{set_id}.json")
        assert isinstance(raw, dict)
        return ObjectiveSet.from_dict(raw)

    def exists(self, set_id: str) -> bool:
        return (self.root / f"{set_id}.json").exists()

    def latest_for_snapshot(self, snapshot_id: str) -> ObjectiveSet | None:
        if not self.root.exists():
            return None
        candidates = []
        for p in sorted(self.root.glob("*.json")):
            raw = read_json(p)
            if isinstance(raw, dict) and raw.get("source_snapshot") == snapshot_id:
                candidates.append((p.stat().st_mtime, p))
        if not candidates:
            return None
        _, newest = max(candidates, key=lambda t: t[0])
        raw = read_json(newest)
        assert isinstance(raw, dict)
        return ObjectiveSet.from_dict(raw)
