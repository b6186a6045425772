"""Exception hierarchy shared across the engine.

Every error the engine raises deliberately derives from EngineError so the
service layer can map them onto wire responses in one place.
"""

from __future__ import annotations


class EngineError(Exception):
    """Base class for all deliberate engine errors."""


# --- provider gateway ------------------------------------------------------


class ProviderError(EngineError):
    pass


class ProviderUnreachable(ProviderError):
    pass


class RoleNotConfigured(ProviderError):
    def __init__(self, role: str) -> None:
        super().__init__(f"no provider configured for role '{role}'")
        self.role = role


class RequestInvalid(ProviderError):
    """The completion request violates its own invariants (e.g. image part
    sent to a non-multimodal role)."""


class TranscriptExhausted(ProviderError):
    """Scripted provider ran out of (or could not match) canned responses."""


class TranscriptMismatch(ProviderError):
    """Ordered scripted transcript's next entry does not match the prompt."""


class StructureParseFailure(ProviderError):
    """Structured completion could not be parsed after all retries."""

    def __init__(self, message: str, attempts: int = 1) -> None:
        super().__init__(message)
        self.attempts = attempts


# --- structure extraction --------------------------------------------------


class ExtractionError(EngineError):
    pass


class NoStructureFound(ExtractionError):
    pass


class SchemaMismatch(ExtractionError):
    def __init__(self, missing: list[str], extra: list[str]) -> None:
        parts = []
        if missing:
            parts.append(f"missing fields: {', '.join(missing)}")
        if extra:
            parts.append(f"extra fields: {', '.join(extra)}")
        super().__init__("; ".join(parts) or "schema mismatch")
        self.missing = missing
        self.extra = extra


# --- context / objectives --------------------------------------------------


class EmptyContext(EngineError):
    pass


class OversizedAttachment(EngineError):
    pass


class ObjectiveValidationFailure(EngineError):
    pass


class EmptySet(EngineError):
    pass


# --- steering --------------------------------------------------------------


class TemplateError(EngineError):
    pass


class DoubleApplication(TemplateError):
    """An objective block was already applied to this template."""


class ScoreParseFailure(EngineError):
    pass


class ScoreOutOfRange(EngineError):
    def __init__(self, value: float) -> None:
        super().__init__(f"score {value} outside [0, 1]")
        self.value = value


class AllCandidatesFailed(EngineError):
    pass


# --- pipelines -------------------------------------------------------------


class ExpertValidationFailure(EngineError):
    pass


class ToolValidationFailure(EngineError):
    pass


class CodegenFailure(EngineError):
    pass


class PipelineFailed(EngineError):
    pass


# --- service ---------------------------------------------------------------


class NotFound(EngineError):
    pass


class Conflict(EngineError):
    pass


class InvalidEdit(EngineError):
    pass
