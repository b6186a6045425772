"""Objective operators and objective-conditioned selection.

gen_objective / eval_objective insert an objective block into a generation or
evaluation template; score() asks the evaluator role for a 0-1 relevance
score; best_of_n() samples N steered candidates and returns the top-scoring
one, with every candidate and score persisted for audit.
"""

from __future__ import annotations

import contextvars
import json
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

from .context import Objective
from .errors import (
    AllCandidatesFailed,
    DoubleApplication,
    EngineError,
    ScoreOutOfRange,
    ScoreParseFailure,
    StructureParseFailure,
    TemplateError,
)
from .gateway import (
    CompletionRequest,
    Part,
    ProviderGateway,
    Role,
    TextPart,
    assemble_prompt_text,
    sha256_hex,
)
from .structured import NUMBER
from .templates import PromptTemplate, escape_braces, relevance_eval_template


def objective_block(objective: Objective, include_weight: bool = True) -> str:
    """Text block an operator inserts for an objective. Braces in the
    objective's fields are escaped so the block is safe inside a template
    body; render collapses them back."""
    lines = [
        f"Name: {escape_braces(objective.name)}",
        f"Description: {escape_braces(objective.description)}",
    ]
    if include_weight:
        lines.append(f"Weight: {objective.weight}")
    return "\n".join(lines)


def _apply_objective(base: PromptTemplate, objective: Objective) -> PromptTemplate:
    if base.objective_applied:
        raise DoubleApplication(
            f"template '{base.template_id}' already carries an objective block"
        )
    if "goal.name" in base.placeholder_names:
        values = {
            "goal.name": escape_braces(objective.name),
            "goal.description": escape_braces(objective.description),
        }
        return base.fill(values, mark_objective_applied=True)
    if "goals" in base.placeholder_names:
        # A duplicated slot would break block uniqueness silently.
        if base.body.count("{goals}") != 1:
            raise TemplateError(
                f"template '{base.template_id}' must have exactly one goals slot"
            )
        return base.fill(
            {"goals": objective_block(objective)}, mark_objective_applied=True
        )
    raise TemplateError(
        f"template '{base.template_id}' has no goals slot "
        "({goals} or {goal.name}/{goal.description})"
    )


def gen_objective(base: PromptTemplate, objective: Objective) -> PromptTemplate:
    """Steer a generation template toward the objective."""
    return _apply_objective(base, objective)


def eval_objective(base: PromptTemplate, objective: Objective) -> PromptTemplate:
    """Steer an evaluation template's assessment toward the objective."""
    return _apply_objective(base, objective)


# --- scoring -----------------------------------------------------------------


def score(
    component_description: str,
    objective: Objective,
    gateway: ProviderGateway,
    extra_parts: tuple[Part, ...] = (),
) -> float:
    """One evaluator-role relevance score in [0, 1].

    No clamping: a parseable but out-of-range reply gets one corrective
    retry, then fails with ScoreOutOfRange.
    """
    if not component_description.strip():
        raise ScoreParseFailure("component description is empty")
    template = eval_objective(relevance_eval_template(), objective)
    prompt = template.render({"component_description": component_description})

    last_error: EngineError | None = None
    for attempt in range(2):
        body = prompt if attempt == 0 else prompt + NUMBER.retry_suffix()
        try:
            result = gateway.complete(CompletionRequest(
                role=Role.EVALUATOR,
                parts=(TextPart(body),) + extra_parts,
                response_mode="structured",
                descriptor=NUMBER,
                max_retries=0,
            ))
        except StructureParseFailure as exc:
            last_error = ScoreParseFailure(str(exc))
            continue
        value = float(result.parsed)  # type: ignore[arg-type]
        if 0.0 <= value <= 1.0:
            return value
        last_error = ScoreOutOfRange(value)
    assert last_error is not None
    raise last_error


# --- fan-out -----------------------------------------------------------------


def fan_out(
    tasks: Sequence[Callable[[], object]],
    *,
    parallel: bool,
    max_workers: int,
) -> list[object | Exception]:
    """Run tasks preserving index order in the result list.

    Sequential when parallel=False (required for ordered scripted replays).
    Each parallel task runs in a copy of the caller's context so audit
    attribution (current job id) survives the thread hop.
    """
    results: list[object | Exception] = [None] * len(tasks)

    def _run(i: int, task: Callable[[], object]) -> None:
        try:
            results[i] = task()
        except Exception as exc:  # collected, caller decides
            results[i] = exc

    if not parallel or len(tasks) <= 1:
        for i, task in enumerate(tasks):
            _run(i, task)
        return results

    ctx = contextvars.copy_context()
    with ThreadPoolExecutor(max_workers=max(1, max_workers)) as pool:
        futures = [
            pool.submit(ctx.copy().run, _run, i, task)
            for i, task in enumerate(tasks)
        ]
        for f in futures:
            f.result()
    return results


# --- best-of-N ---------------------------------------------------------------


@dataclass(frozen=True)
class ScoredCandidate:
    index: int
    content: str
    score: float | None  # None only on the unscored best-of-1 path

    def __post_init__(self) -> None:
        if self.score is not None and not (0.0 <= self.score <= 1.0):
            raise ScoreOutOfRange(self.score)


class AuditWriter:
    """JSON-lines audit of one best-of-N run: one record per candidate."""

    def __init__(self, path: Path | None) -> None:
        self.path = path
        self._lock = threading.Lock()
        self.records: list[dict] = []

    def write(self, record: dict) -> None:
        with self._lock:
            self.records.append(record)
            if self.path:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with self.path.open("a", encoding="utf-8") as fh:
                    fh.write(json.dumps(record, sort_keys=True) + "\n")


def argmax_lowest_index(pairs: Sequence[tuple[int, float]]) -> int:
    """Index of the max score; ties go to the lowest index."""
    if not pairs:
        raise ValueError("no scored pairs")
    ordered = sorted(pairs, key=lambda p: p[0])
    best_index, best_score = ordered[0]
    for index, value in ordered[1:]:
        if value > best_score:
            best_index, best_score = index, value
    return best_index


def best_of_n(
    generator_template: PromptTemplate,
    objective: Objective,
    n: int,
    gateway: ProviderGateway,
    fills: dict[str, str] | None = None,
    extra_parts: tuple[Part, ...] = (),
    audit_path: Path | None = None,
    role: Role = Role.GENERATOR,
) -> ScoredCandidate:
    """Sample n steered candidates, score each against the objective, and
    return the argmax (ties to the lowest generation index).

    Generation failures are tolerated per candidate; if every generation
    fails, raises AllCandidatesFailed. n=1 skips scoring entirely.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    steered = gen_objective(generator_template, objective)
    prompt = steered.render(fills or {})
    audit = AuditWriter(audit_path)

    def _generate() -> str:
        result = gateway.complete(CompletionRequest(
            role=role,
            parts=(TextPart(prompt),) + extra_parts,
        ))
        return result.raw_text

    parallel = not gateway.requires_serial(role)
    cap = gateway.in_flight_cap(role)
    outcomes = fan_out([_generate] * n, parallel=parallel, max_workers=cap)

    prompt_hash = sha256_hex(assemble_prompt_text("", (TextPart(prompt),) + extra_parts))
    candidates: list[tuple[int, str]] = []
    for i, outcome in enumerate(outcomes):
        if isinstance(outcome, Exception):
            audit.write({
                "index": i, "prompt_hash": prompt_hash,
                "content": None, "score": None, "error": str(outcome),
            })
        else:
            candidates.append((i, outcome))  # type: ignore[arg-type]
    if not candidates:
        raise AllCandidatesFailed(f"all {n} generations failed")

    if n == 1:
        index, content = candidates[0]
        audit.write({"index": index, "prompt_hash": prompt_hash,
                     "content": content, "score": None})
        return ScoredCandidate(index=index, content=content, score=None)

    eval_parallel = not gateway.requires_serial(Role.EVALUATOR)
    eval_cap = gateway.in_flight_cap(Role.EVALUATOR)
    score_tasks = [
        (lambda content=content: score(content, objective, gateway))
        for _, content in candidates
    ]
    score_outcomes = fan_out(score_tasks, parallel=eval_parallel, max_workers=eval_cap)

    scored: list[tuple[int, str, float]] = []
    for (index, content), outcome in zip(candidates, score_outcomes):
        if isinstance(outcome, Exception):
            raise outcome
        value = float(outcome)  # type: ignore[arg-type]
        scored.append((index, content, value))

    # Deterministic reduction: sort by index before the argmax so completion
    # order cannot influence selection.
    scored.sort(key=lambda t: t[0])
    for index, content, value in scored:
        audit.write({"index": index, "prompt_hash": prompt_hash,
                     "content": content, "score": value})
    best = argmax_lowest_index([(i, v) for i, _, v in scored])
    content = next(c for i, c, _ in scored if i == best)
    value = next(v for i, _, v in scored if i == best)
    return ScoredCandidate(index=best, content=content, score=value)
