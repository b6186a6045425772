"""Recovery of structured values from free-form model output.

Models asked to "respond ONLY with a JSON" routinely wrap the payload in
prose, code fences, or both. extract_structure scans the raw text for the
first balanced top-level object/array (or numeric token) and validates it
against a small descriptor, so callers never touch json.loads directly.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Any

from .errors import NoStructureFound, SchemaMismatch

_FLOAT_RE = re.compile(r"-?\d+(?:\.\d+)?(?:[eE][+-]?\d+)?")

_OPENERS = {"object": "{", "array": "["}
_CLOSERS = {"{": "}", "[": "]"}


@dataclass(frozen=True)
class StructureDescriptor:
    """What shape the structured reply must take.

    kind: "object", "array", or "number".
    required: keys that must be present on the object (kind="object").
    item_required: keys that must be present on every element of the array
        (kind="array"; elements are then expected to be objects).
    allow_extra: whether unknown keys are tolerated on validated objects.
    reminder: one-line restatement of the output contract, appended to the
        prompt on a corrective retry.
    """

    kind: str
    required: tuple[str, ...] = ()
    item_required: tuple[str, ...] = ()
    allow_extra: bool = True
    reminder: str = ""

    def __post_init__(self) -> None:
        if self.kind not in ("object", "array", "number"):
            raise ValueError(f"unknown descriptor kind {self.kind!r}")

    def retry_suffix(self) -> str:
        if self.reminder:
            return "\n\n" + self.reminder
        if self.kind == "number":
            return "\n\nONLY respond with the numeric score, no other text."
        shape = "JSON object" if self.kind == "object" else "JSON array"
        keys = self.required or self.item_required
        if keys:
            return (
                f"\n\nRespond ONLY with a {shape} containing the fields: "
                + ", ".join(keys) + "."
            )
        return f"\n\nRespond ONLY with a {shape}, no other text."


NUMBER = StructureDescriptor(kind="number")


def _scan_balanced(raw: str, opener: str) -> Any:
    """Return the first balanced, parseable object/array starting at `opener`.

    Tracks JSON string/escape state so braces inside string values do not
    confuse the balance count. Candidates that balance but fail to parse are
    skipped and the scan continues.
    """
    closer = _CLOSERS[opener]
    start = raw.find(opener)
    while start != -1:
        depth = 0
        in_string = False
        escaped = False
        for i in range(start, len(raw)):
            ch = raw[i]
            if in_string:
                if escaped:
                    escaped = False
                elif ch == "\\":
                    escaped = True
                elif ch == '"':
                    in_string = False
                continue
            if ch == '"':
                in_string = True
            elif ch == opener:
                depth += 1
            elif ch == closer:
                depth -= 1
                if depth == 0:
                    candidate = raw[start : i + 1]
                    try:
                        return json.loads(candidate)
                    except json.JSONDecodeError:
                        break
        start = raw.find(opener, start + 1)
    raise NoStructureFound(f"no balanced {opener}...{closer} value found")


def _validate_object(value: Any, required: tuple[str, ...], allow_extra: bool) -> None:
    if not isinstance(value, dict):
        raise SchemaMismatch(missing=list(required), extra=[])
    missing = [k for k in required if k not in value]
    extra = [] if allow_extra else [k for k in value if k not in required]
    if missing or extra:
        raise SchemaMismatch(missing=missing, extra=extra)


def extract_structure(raw: str, descriptor: StructureDescriptor) -> Any:
    """Extract and validate the first structured value found in `raw`.

    Raises NoStructureFound when nothing parseable exists, SchemaMismatch
    when a value parses but lacks required fields.
    """
    if descriptor.kind == "number":
        try:
            return float(raw.strip())
        except ValueError:
            pass
        m = _FLOAT_RE.search(raw)
        if m is None:
            raise NoStructureFound("no numeric token found")
        return float(m.group(0))

    value = _scan_balanced(raw, _OPENERS[descriptor.kind])

    if descriptor.kind == "object":
        _validate_object(value, descriptor.required, descriptor.allow_extra)
    else:
        if descriptor.item_required:
            for item in value:
                _validate_object(item, descriptor.item_required, descriptor.allow_extra)
    return value
