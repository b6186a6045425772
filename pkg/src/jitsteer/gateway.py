"""Role-routed access to completion providers.

Pipelines never talk to a model directly: they name a role (inducer,
generator, ui_codegen, evaluator, search), and the gateway resolves it to a
configured provider, enforces the per-role in-flight cap, runs the
structured-output retry loop, and records every physical call in the audit
log.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Protocol, Union

from .audit import CallLog, current_job_id
from .errors import RequestInvalid, RoleNotConfigured, StructureParseFailure
from .errors import ExtractionError
from .structured import StructureDescriptor, extract_structure

DEFAULT_MAX_RETRIES = 2
DEFAULT_IN_FLIGHT_CAP = 8
DEFAULT_TIMEOUT_S = 120.0
UI_CODEGEN_TIMEOUT_S = 300.0
DEFAULT_MAX_IMAGE_BYTES = 4 * 1024 * 1024


class Role(str, Enum):
    INDUCER = "inducer"
    GENERATOR = "generator"
    UI_CODEGEN = "ui_codegen"
    EVALUATOR = "evaluator"
    SEARCH = "search"


@dataclass(frozen=True)
class TextPart:
    text: str


@dataclass(frozen=True)
class ImagePart:
    data: bytes
    media_type: str


Part = Union[TextPart, ImagePart]


def sha256_hex(data: bytes | str) -> str:
    if isinstance(data, str):
        data = data.encode("utf-8")
    return hashlib.sha256(data).hexdigest()


def assemble_prompt_text(system_text: str, parts: tuple[Part, ...]) -> str:
    """Canonical text view of a request, used for transcript matching,
    prompt hashing, and the audit log. Image parts appear as stable marker
    lines so replays hash identically."""
    chunks = []
    if system_text:
        chunks.append(system_text)
    for part in parts:
        if isinstance(part, TextPart):
            chunks.append(part.text)
        else:
            chunks.append(f"[image {part.media_type} {sha256_hex(part.data)[:12]}]")
    return "\n\n".join(chunks)


@dataclass(frozen=True)
class CompletionRequest:
    role: Role
    system_text: str = ""
    parts: tuple[Part, ...] = ()
    response_mode: str = "free_text"  # or "structured"
    descriptor: StructureDescriptor | None = None
    max_retries: int = DEFAULT_MAX_RETRIES

    def __post_init__(self) -> None:
        if self.response_mode not in ("free_text", "structured"):
            raise RequestInvalid(f"unknown response mode {self.response_mode!r}")
        if self.response_mode == "structured" and self.descriptor is None:
            raise RequestInvalid("structured mode requires a descriptor")
        if self.max_retries < 0:
            raise RequestInvalid("max_retries must be >= 0")


@dataclass(frozen=True)
class CompletionResult:
    raw_text: str
    parsed: object | None = None
    attempts_used: int = 1


@dataclass(frozen=True)
class RoleConfig:
    provider: str
    model: str = ""
    endpoint: str = ""
    api_key_env: str = ""
    multimodal: bool = False
    in_flight_cap: int = DEFAULT_IN_FLIGHT_CAP
    timeout_s: float = DEFAULT_TIMEOUT_S
    max_image_bytes: int = DEFAULT_MAX_IMAGE_BYTES
    temperature: float | None = None
    # scripted-provider options
    transcript: str = ""
    strictness: str = "ordered"
    delay_s: float = 0.0

    @classmethod
    def from_dict(cls, raw: dict, role: Role) -> "RoleConfig":
        known = {f.name for f in cls.__dataclass_fields__.values()}  # type: ignore[attr-defined]
        kwargs = {k: v for k, v in raw.items() if k in known}
        cfg = cls(**kwargs)
        if "timeout_s" not in raw and role is Role.UI_CODEGEN:
            cfg = replace(cfg, timeout_s=UI_CODEGEN_TIMEOUT_S)
        return cfg


class Provider(Protocol):
    def generate(self, system_text: str, parts: tuple[Part, ...], cfg: RoleConfig) -> str:
        ...


class _RoleGate:
    """Per-role in-flight limiter that also tracks the concurrency high-water
    mark, so tests can assert the cap was honored."""

    def __init__(self, cap: int) -> None:
        self.cap = cap
        self._sem = threading.BoundedSemaphore(cap)
        self._lock = threading.Lock()
        self._active = 0
        self.high_water = 0

    def __enter__(self) -> "_RoleGate":
        self._sem.acquire()
        with self._lock:
            self._active += 1
            self.high_water = max(self.high_water, self._active)
        return self

    def __exit__(self, *exc: object) -> None:
        with self._lock:
            self._active -= 1
        self._sem.release()


class ProviderGateway:
    """Routes completion requests to providers by role."""

    def __init__(
        self,
        configs: dict[Role, RoleConfig],
        providers: dict[Role, Provider],
        call_log: CallLog | None = None,
    ) -> None:
        self.configs = configs
        self.providers = providers
        self.call_log = call_log or CallLog()
        self._gates = {role: _RoleGate(cfg.in_flight_cap) for role, cfg in configs.items()}

    # -- construction ------------------------------------------------------

    @classmethod
    def from_config_file(cls, path: str | Path, call_log: CallLog | None = None) -> "ProviderGateway":
        """Build a gateway from a JSON role map.

        Format: {"<role>": {"provider": ..., "model": ..., "endpoint": ...,
        "api_key_env": ..., "multimodal": ..., "in_flight_cap": ...}, ...}.
        Scripted roles take {"provider": "scripted", "transcript": <path>,
        "strictness": "ordered"|"matched"}. Relative transcript paths resolve
        against the config file's directory.
        """
        path = Path(path)
        raw = json.loads(path.read_text(encoding="utf-8"))
        configs: dict[Role, RoleConfig] = {}
        for role_name, entry in raw.items():
            role = Role(role_name)
            cfg = RoleConfig.from_dict(entry, role)
            if cfg.provider == "scripted" and cfg.transcript:
                transcript_path = Path(cfg.transcript)
                if not transcript_path.is_absolute():
                    cfg = replace(cfg, transcript=str(path.parent / transcript_path))
            configs[role] = cfg
        providers = _build_providers(configs)
        return cls(configs, providers, call_log=call_log)

    # -- introspection -----------------------------------------------------

    def high_water(self, role: Role) -> int:
        return self._gates[role].high_water

    def in_flight_cap(self, role: Role) -> int:
        if role not in self.configs:
            raise RoleNotConfigured(role.value)
        return self.configs[role].in_flight_cap

    def requires_serial(self, role: Role) -> bool:
        """True when fan-out over this role must run sequentially to keep
        replays deterministic (ordered scripted transcripts assign responses
        by arrival order)."""
        cfg = self.configs.get(role)
        return bool(cfg and cfg.provider == "scripted" and cfg.strictness == "ordered")

    # -- main entry point ----------------------------------------------------

    def complete(self, request: CompletionRequest) -> CompletionResult:
        if request.role not in self.configs:
            raise RoleNotConfigured(request.role.value)
        cfg = self.configs[request.role]
        self._check_parts(request, cfg)
        provider = self.providers[request.role]
        gate = self._gates[request.role]

        attempts = 0
        last_error: ExtractionError | None = None
        parts = request.parts
        while attempts <= (request.max_retries if request.response_mode == "structured" else 0):
            attempts += 1
            prompt_text = assemble_prompt_text(request.system_text, parts)
            with gate:
                raw = provider.generate(request.system_text, parts, cfg)
            self.call_log.record(CallLog.make(
                job_id=current_job_id.get(),
                role=request.role.value,
                prompt_hash=sha256_hex(prompt_text),
                prompt=prompt_text,
                response_hash=sha256_hex(raw),
                attempt=attempts,
            ))
            if request.response_mode == "free_text":
                return CompletionResult(raw_text=raw, attempts_used=attempts)
            assert request.descriptor is not None
            try:
                parsed = extract_structure(raw, request.descriptor)
                return CompletionResult(raw_text=raw, parsed=parsed, attempts_used=attempts)
            except ExtractionError as exc:
                last_error = exc
                parts = _with_retry_suffix(request.parts, request.descriptor)
        raise StructureParseFailure(
            f"structured reply unparseable after {attempts} attempts: {last_error}",
            attempts=attempts,
        )

    # -- internals -----------------------------------------------------------

    @staticmethod
    def _check_parts(request: CompletionRequest, cfg: RoleConfig) -> None:
        if not request.parts:
            raise RequestInvalid("request must contain at least one user part")
        for part in request.parts:
            if isinstance(part, ImagePart):
                if not cfg.multimodal:
                    raise RequestInvalid(
                        f"role '{request.role.value}' is not configured as multimodal"
                    )
                if len(part.data) > cfg.max_image_bytes:
                    raise RequestInvalid(
                        f"image part of {len(part.data)} bytes exceeds cap "
                        f"{cfg.max_image_bytes}"
                    )


def _with_retry_suffix(parts: tuple[Part, ...], descriptor: StructureDescriptor) -> tuple[Part, ...]:
    return parts + (TextPart(descriptor.retry_suffix().strip()),)


def _build_providers(configs: dict[Role, RoleConfig]) -> dict[Role, Provider]:
    from .live import AnthropicStyleProvider, OpenAIStyleProvider
    from .scripted import ScriptedProvider

    cache: dict[tuple, Provider] = {}
    providers: dict[Role, Provider] = {}
    for role, cfg in configs.items():
        if cfg.provider == "scripted":
            # Roles sharing one transcript file share one provider instance,
            # so consumption order is global across those roles.
            key = ("scripted", cfg.transcript, cfg.strictness)
            if key not in cache:
                cache[key] = ScriptedProvider.from_file(cfg.transcript, strictness=cfg.strictness)
        elif cfg.provider in ("openai", "openai-compatible"):
            key = ("openai", cfg.endpoint)
            if key not in cache:
                cache[key] = OpenAIStyleProvider()
        elif cfg.provider == "anthropic":
            key = ("anthropic", cfg.endpoint)
            if key not in cache:
                cache[key] = AnthropicStyleProvider()
        else:
            raise ValueError(f"unknown provider kind {cfg.provider!r} for role {role.value}")
        providers[role] = cache[key]
    return providers


def api_key_for(cfg: RoleConfig) -> str:
    if not cfg.api_key_env:
        return ""
    return os.environ.get(cfg.api_key_env, "")
