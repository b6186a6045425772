"""Objective induction: from a context snapshot to a weighted objective set.

The induction prompt walks the model through a five-step reasoning framework
(application clues, genre and stage, audience, ideal-version gap, simulated
reaction to candidate tools) and requests a JSON reply holding the reasoning
and the goals with 1-10 weights.
"""

from __future__ import annotations

import threading
from concurrent.futures import Future
from dataclasses import dataclass

from .context import (
    ContextSnapshot,
    Objective,
    ObjectiveSet,
    ObjectiveSetStore,
    context_block_text,
    context_image_parts,
)
from .errors import EmptySet, ObjectiveValidationFailure
from .gateway import CompletionRequest, ProviderGateway, Role, TextPart, sha256_hex
from .structured import StructureDescriptor
from .templates import induction_template

INDUCTION_SCHEMA_TEXT = """\
{
  "reasoning": "<your step-by-step reasoning>",
  "goals": [
    {"name": "<short goal name>", "description": "<1-2 sentence description>", "weight": <integer 1-10>}
  ]
}"""

INDUCTION_DESCRIPTOR = StructureDescriptor(
    kind="object",
    required=("goals",),
    reminder=(
        "Respond ONLY with a JSON object of the form "
        '{"reasoning": "...", "goals": [{"name": "...", "description": "...", '
        '"weight": <integer 1-10>}]} and nothing else.'
    ),
)

WEIGHT_RETRY_NOTE = (
    "Every goal's weight must be an integer between 1 and 10, its name at most "
    "120 characters, and its description a non-empty 1-2 sentence text. "
    "Respond ONLY with the JSON object."
)


@dataclass(frozen=True)
class InductionConfig:
    limit: int = 3
    meta_instructions: str | None = None

    def __post_init__(self) -> None:
        if not (1 <= self.limit <= 10):
            raise ValueError(f"induction limit {self.limit} outside [1, 10]")


def _parse_objectives(parsed: dict, limit: int) -> tuple[list[Objective], str]:
    goals = parsed.get("goals")
    if not isinstance(goals, list) or not goals:
        raise ObjectiveValidationFailure("reply contains no goals")
    objectives = [Objective.from_dict(g) for g in goals if isinstance(g, dict)]
    if len(objectives) != len(goals):
        raise ObjectiveValidationFailure("reply contains non-object goal entries")
    if len(objectives) > limit:
        # Tolerate over-delivery after the retry by keeping the top-weighted
        # `limit` goals; the set invariant (length <= limit) still holds.
        objectives = sorted(objectives, key=lambda o: -o.weight)[:limit]
    reasoning = parsed.get("reasoning", "")
    return objectives, str(reasoning)


class Inducer:
    """Runs induction calls; concurrent inductions of one snapshot coalesce."""

    def __init__(self, gateway: ProviderGateway, store: ObjectiveSetStore | None = None) -> None:
        self.gateway = gateway
        self.store = store
        self._lock = threading.Lock()
        self._in_flight: dict[tuple[str, int, str], Future] = {}

    def induce(self, snapshot: ContextSnapshot, config: InductionConfig | None = None) -> ObjectiveSet:
        config = config or InductionConfig()
        key = (snapshot.snapshot_id, config.limit, config.meta_instructions or "")
        with self._lock:
            existing = self._in_flight.get(key)
            if existing is not None:
                future = existing
                owner = False
            else:
                future = Future()
                self._in_flight[key] = future
                owner = True
        if not owner:
            return future.result()
        try:
            result = self._induce(snapshot, config)
            future.set_result(result)
            return result
        except BaseException as exc:
            future.set_exception(exc)
            raise
        finally:
            with self._lock:
                self._in_flight.pop(key, None)

    def _induce(self, snapshot: ContextSnapshot, config: InductionConfig) -> ObjectiveSet:
        body = induction_template().render({
            "context": context_block_text(snapshot),
            "limit": str(config.limit),
            "json_schema": INDUCTION_SCHEMA_TEXT,
        })
        if config.meta_instructions:
            body = body + "\n" + config.meta_instructions
        parts = (TextPart(body),) + context_image_parts(snapshot)

        last_failure: ObjectiveValidationFailure | None = None
        retry_note = ""
        for _ in range(2):  # one corrective retry on objective validation
            result = self.gateway.complete(CompletionRequest(
                role=Role.INDUCER,
                parts=parts if not retry_note else parts + (TextPart(retry_note),),
                response_mode="structured",
                descriptor=INDUCTION_DESCRIPTOR,
            ))
            try:
                objectives, reasoning = _parse_objectives(result.parsed, config.limit)
            except ObjectiveValidationFailure as exc:
                last_failure = exc
                retry_note = WEIGHT_RETRY_NOTE
                continue
            set_id = sha256_hex(snapshot.snapshot_id + sha256_hex(result.raw_text))[:16]
            objective_set = ObjectiveSet(
                objectives=tuple(objectives),
                reasoning_trace=reasoning,
                source_snapshot=snapshot.snapshot_id,
                set_id=set_id,
            )
            if self.store is not None:
                self.store.save(objective_set)
            return objective_set
        assert last_failure is not None
        raise last_failure


def induce(
    snapshot: ContextSnapshot,
    gateway: ProviderGateway,
    config: InductionConfig | None = None,
    store: ObjectiveSetStore | None = None,
) -> ObjectiveSet:
    return Inducer(gateway, store=store).induce(snapshot, config)


def top_objective(objective_set: ObjectiveSet) -> Objective:
    """First element: max weight, model-order tiebreak."""
    if not objective_set.objectives:
        raise EmptySet("objective set is empty")
    return objective_set.objectives[0]
