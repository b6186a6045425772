"""Expert-conditioned assistance: propose entities, retrieve background,
score and select, choose an output format, and run attributed responses.

Entities are not limited to persona-like experts; communities, schools of
thought, fictional characters, concepts, and styles all work, which is why
the type carries a free `kind` tag.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

from .context import ContextSnapshot, Objective, context_block_text, context_image_parts
from .errors import (
    ExpertValidationFailure,
    PipelineFailed,
    ProviderError,
    RoleNotConfigured,
)
from .gateway import CompletionRequest, ProviderGateway, Role, TextPart
from .steering import eval_objective, fan_out, gen_objective, objective_block, score
from .structured import StructureDescriptor
from .templates import (
    FORMAT_INSTRUCTIONS,
    expert_background_template,
    expert_proposal_template,
    expert_run_template,
    format_select_template,
    synthesis_template,
)

logger = logging.getLogger(__name__)

MAX_BACKGROUND_PARAGRAPHS = 3
BACKGROUND_TRUNCATION_MARKER = "[…truncated…]"
NO_RETRIEVAL_MARKER = "[no retrieval]"

OUTPUT_FORMATS = ("Feedback", "Brainstorm", "LineEditor")
DEFAULT_OUTPUT_FORMAT = "Feedback"

ENTITY_SCHEMA_TEXT = """\
{
  "entities": [
    {"name": "<entity name>", "description": "<what this entity contributes>", "kind": "<person | community | school-of-thought | fictional | concept | style>"}
  ]
}"""

ENTITY_DESCRIPTOR = StructureDescriptor(
    kind="object",
    required=("entities",),
    reminder=(
        'Respond ONLY with a JSON object of the form {"entities": '
        '[{"name": "...", "description": "...", "kind": "..."}]} and nothing else.'
    ),
)


@dataclass(frozen=True)
class ExpertSpec:
    name: str
    description: str
    background: str = ""
    relevance_score: float | None = None
    kind: str = "concept"

    def summary(self) -> str:
        text = f"{self.name}: {self.description}"
        if self.background:
            text += "\n\n" + self.background
        return text

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "description": self.description,
            "background": self.background,
            "relevance_score": self.relevance_score,
            "kind": self.kind,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "ExpertSpec":
        return cls(
            name=str(raw.get("name", "")),
            description=str(raw.get("description", "")),
            background=str(raw.get("background", "")),
            relevance_score=raw.get("relevance_score"),
            kind=str(raw.get("kind", "concept")) or "concept",
        )


def propose_experts(
    snapshot: ContextSnapshot,
    objective: Objective,
    gateway: ProviderGateway,
    limit: int = 3,
) -> list[ExpertSpec]:
    """Ask the generator role for up to `limit` candidate entities."""
    if limit < 1:
        raise ValueError("limit must be >= 1")
    template = gen_objective(expert_proposal_template(), objective)
    prompt = template.render({
        "context": context_block_text(snapshot),
        "limit": str(limit),
        "json_schema": ENTITY_SCHEMA_TEXT,
    })
    parts = (TextPart(prompt),) + context_image_parts(snapshot)

    count_note = ""
    for attempt in range(2):
        sent = parts if not count_note else parts + (TextPart(count_note),)
        result = gateway.complete(CompletionRequest(
            role=Role.GENERATOR,
            parts=sent,
            response_mode="structured",
            descriptor=ENTITY_DESCRIPTOR,
        ))
        entities = result.parsed.get("entities", [])  # type: ignore[union-attr]
        specs = [
            ExpertSpec(
                name=str(e.get("name", "")).strip(),
                description=str(e.get("description", "")).strip(),
                kind=str(e.get("kind", "concept")).strip() or "concept",
            )
            for e in entities
            if isinstance(e, dict)
        ]
        specs = [s for s in specs if s.name and s.description]
        if not specs:
            raise ExpertValidationFailure("reply contains no usable entities")
        if len(specs) <= limit:
            return specs
        count_note = (
            f"Return at most {limit} entities. Respond ONLY with the JSON object."
        )
    raise ExpertValidationFailure(
        f"model returned {len(specs)} entities for limit {limit} after retry"
    )


def _cap_paragraphs(text: str, cap: int = MAX_BACKGROUND_PARAGRAPHS) -> str:
    paragraphs = [p for p in (chunk.strip() for chunk in text.split("\n\n")) if p]
    if len(paragraphs) <= cap:
        return "\n\n".join(paragraphs)
    return "\n\n".join(paragraphs[:cap] + [BACKGROUND_TRUNCATION_MARKER])


def enrich_expert(
    expert: ExpertSpec,
    objective: Objective,
    gateway: ProviderGateway,
    warnings: list[str] | None = None,
) -> ExpertSpec:
    """Populate background via the search role, capped at 3 paragraphs.

    If the search role is unavailable the run degrades: background falls back
    to the description with an explicit no-retrieval marker.
    """
    prompt = expert_background_template().render({
        "goals_text": objective_block(objective, include_weight=False),
        "entity_name": expert.name,
        "entity_desc": expert.description,
    })
    try:
        result = gateway.complete(CompletionRequest(
            role=Role.SEARCH,
            parts=(TextPart(prompt),),
        ))
    except (RoleNotConfigured, ProviderError) as exc:
        message = f"background retrieval unavailable for '{expert.name}': {exc}"
        logger.warning(message)
        if warnings is not None:
            warnings.append(message)
        return replace(expert, background=f"{expert.description}\n\n{NO_RETRIEVAL_MARKER}")
    return replace(expert, background=_cap_paragraphs(result.raw_text.strip()))


def select_experts(
    candidates: list[ExpertSpec],
    objective: Objective,
    gateway: ProviderGateway,
    keep: int = 3,
) -> list[ExpertSpec]:
    """Score candidates against the objective; keep the top `keep`, ties in
    proposal order."""
    parallel = not gateway.requires_serial(Role.EVALUATOR)
    cap = gateway.in_flight_cap(Role.EVALUATOR)
    tasks = [
        (lambda c=c: score(c.summary(), objective, gateway))
        for c in candidates
    ]
    outcomes = fan_out(tasks, parallel=parallel, max_workers=cap)
    scored: list[ExpertSpec] = []
    for candidate, outcome in zip(candidates, outcomes):
        if isinstance(outcome, Exception):
            raise outcome
        scored.append(replace(candidate, relevance_score=float(outcome)))  # type: ignore[arg-type]
    # Stable sort on score descending preserves proposal order for ties.
    ranked = sorted(scored, key=lambda s: -(s.relevance_score or 0.0))
    return ranked[:keep]


def select_output_format(
    snapshot: ContextSnapshot,
    objective: Objective,
    gateway: ProviderGateway,
    warnings: list[str] | None = None,
) -> str:
    """Evaluator-role pick among Feedback / Brainstorm / LineEditor.

    Unparseable replies get one corrective retry, then fall back to Feedback
    with a warning.
    """
    template = eval_objective(format_select_template(), objective)
    prompt = template.render({"context": context_block_text(snapshot)})
    note = ""
    for _ in range(2):
        body = prompt if not note else prompt + "\n" + note
        result = gateway.complete(CompletionRequest(
            role=Role.EVALUATOR,
            parts=(TextPart(body),),
        ))
        parsed = _parse_format(result.raw_text)
        if parsed is not None:
            return parsed
        note = "ONLY respond with one of: Feedback, Brainstorm, Line Editor."
    message = f"unparseable output-format reply; defaulting to {DEFAULT_OUTPUT_FORMAT}"
    logger.warning(message)
    if warnings is not None:
        warnings.append(message)
    return DEFAULT_OUTPUT_FORMAT


def _parse_format(raw: str) -> str | None:
    normalized = "".join(ch for ch in raw.strip().lower() if ch.isalpha())
    mapping = {
        "feedback": "Feedback",
        "brainstorm": "Brainstorm",
        "lineeditor": "LineEditor",
    }
    return mapping.get(normalized)


def run_experts(
    snapshot: ContextSnapshot,
    objective: Objective,
    experts: list[ExpertSpec],
    output_format: str,
    gateway: ProviderGateway,
    user_input: str | None = None,
    highlight: str | None = None,
    warnings: list[str] | None = None,
) -> dict:
    """One generator call per expert, plus a synthesis call for Feedback.

    A single expert failing marks its section failed and the rest proceed;
    only a full wipeout raises PipelineFailed.
    """
    if output_format not in OUTPUT_FORMATS:
        raise ValueError(f"unknown output format {output_format!r}")
    if not experts:
        raise PipelineFailed("no experts to run")

    instructions = FORMAT_INSTRUCTIONS[output_format]
    user_text = user_input or snapshot.text_content or ""
    if output_format == "LineEditor" and highlight:
        user_text = f"{user_text}\n\nHIGHLIGHTED TEXT:\n{highlight}"

    def _run_one(expert: ExpertSpec) -> str:
        template = gen_objective(expert_run_template(), objective)
        prompt = template.render({
            "expert_name": expert.name,
            "expert_description": expert.description,
            "expert_background": expert.background or expert.description,
            "context": context_block_text(snapshot),
            "format_instructions": instructions,
            "user_input": user_text,
        })
        result = gateway.complete(CompletionRequest(
            role=Role.GENERATOR,
            parts=(TextPart(prompt),) + context_image_parts(snapshot),
        ))
        return result.raw_text

    parallel = not gateway.requires_serial(Role.GENERATOR)
    cap = gateway.in_flight_cap(Role.GENERATOR)
    tasks = [(lambda e=e: _run_one(e)) for e in experts]
    outcomes = fan_out(tasks, parallel=parallel, max_workers=cap)

    sections = []
    ok = 0
    for expert, outcome in zip(experts, outcomes):
        if isinstance(outcome, Exception):
            message = f"expert '{expert.name}' failed: {outcome}"
            logger.warning(message)
            if warnings is not None:
                warnings.append(message)
            sections.append({"expert": expert.name, "text": "", "status": "failed"})
        else:
            ok += 1
            sections.append({"expert": expert.name, "text": str(outcome), "status": "ok"})
    if ok == 0:
        raise PipelineFailed("every expert call failed")

    document = {
        "format": output_format,
        "experts": [e.to_dict() for e in experts],
        "sections": sections,
    }
    if output_format == "Feedback":
        joined = "\n\n".join(
            f"=== {s['expert']} ===\n{s['text']}" for s in sections if s["status"] == "ok"
        )
        template = gen_objective(synthesis_template(), objective)
        prompt = template.render({"sections": joined})
        result = gateway.complete(CompletionRequest(
            role=Role.GENERATOR,
            parts=(TextPart(prompt),),
        ))
        document["synthesis"] = result.raw_text
    return document
