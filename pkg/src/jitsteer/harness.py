"""Desk-scale evaluation harness.

Replays a corpus of snapshots through objective-steered vs. baseline
generation and computes judge-based win rates, plus best-of-N curves over a
shared candidate pool. The judge here is a model standing in for the human
raters the original protocol used; every report labels it as such.
"""

from __future__ import annotations

import csv
import json
import random
from dataclasses import dataclass, field
from pathlib import Path

from .context import ContextSnapshot, Objective, context_block_text, ingest
from .errors import EngineError
from .gateway import CompletionRequest, ProviderGateway, Role, TextPart
from .steering import argmax_lowest_index, eval_objective, fan_out, gen_objective, score
from .templates import PromptTemplate, feedback_generator_template, pairwise_judge_template

JUDGE_LABEL = "model-standin"


def baseline_template(template: PromptTemplate) -> PromptTemplate:
    """The same generator with its GOALS block removed entirely: what an
    unsteered model would have been asked."""
    body = template.body.replace("GOALS:\n{goals}\n\n", "").replace("GOALS:\n{goals}\n", "")
    return PromptTemplate.from_body(template.template_id + "__baseline", body)


@dataclass(frozen=True)
class JudgeVerdict:
    winner: str  # "jit" | "baseline" | "invalid"  (or "a"/"b" for bon pairs)
    raw: str
    order_flipped: bool


def _judge(
    objective: Objective,
    first: str,
    second: str,
    gateway: ProviderGateway,
    rng: random.Random,
    labels: tuple[str, str],
) -> JudgeVerdict:
    """One pairwise judge call with seeded A/B order randomization; the
    verdict is de-randomized back onto `labels` before recording."""
    flipped = rng.random() < 0.5
    option_a, option_b = (second, first) if flipped else (first, second)
    template = eval_objective(pairwise_judge_template(), objective)
    prompt = template.render({"option_a": option_a, "option_b": option_b})
    reply = gateway.complete(CompletionRequest(
        role=Role.EVALUATOR, parts=(TextPart(prompt),),
    )).raw_text
    letter = reply.strip().strip(".").upper()
    if letter not in ("A", "B"):
        return JudgeVerdict(winner="invalid", raw=reply, order_flipped=flipped)
    picked_first = (letter == "A") != flipped
    return JudgeVerdict(
        winner=labels[0] if picked_first else labels[1],
        raw=reply,
        order_flipped=flipped,
    )


def compare(
    snapshot: ContextSnapshot,
    objective: Objective,
    gateway: ProviderGateway,
    generator_template: PromptTemplate | None = None,
    seed: int = 0,
) -> dict:
    """Steered vs. baseline generation for one snapshot, judged pairwise."""
    template = generator_template or feedback_generator_template()
    context = context_block_text(snapshot)

    jit_prompt = gen_objective(template, objective).render({"context": context})
    baseline_prompt = baseline_template(template).render({"context": context})

    jit_output = gateway.complete(CompletionRequest(
        role=Role.GENERATOR, parts=(TextPart(jit_prompt),),
    )).raw_text
    baseline_output = gateway.complete(CompletionRequest(
        role=Role.GENERATOR, parts=(TextPart(baseline_prompt),),
    )).raw_text

    rng = random.Random(f"{seed}:{snapshot.snapshot_id}")
    verdict = _judge(objective, jit_output, baseline_output, gateway, rng,
                     labels=("jit", "baseline"))
    return {
        "snapshot": snapshot.snapshot_id,
        "jit_output": jit_output,
        "baseline_output": baseline_output,
        "winner": verdict.winner,
        "judge_raw": verdict.raw,
        "order_flipped": verdict.order_flipped,
    }


def bon_curve(
    snapshot: ContextSnapshot,
    objective: Objective,
    n_values: list[int],
    gateway: ProviderGateway,
    generator_template: PromptTemplate | None = None,
    seed: int = 0,
) -> dict:
    """Best-of-n over one shared candidate pool per snapshot.

    The pool holds max(n_values) candidates; selection for each n is the
    argmax over the pool's first n, so the selected score is non-decreasing
    in n by construction (prefix argmax).
    """
    if not n_values or any(n < 1 for n in n_values):
        raise ValueError("n_values must be positive")
    n_values = sorted(set(n_values))
    pool_size = max(n_values)
    template = generator_template or feedback_generator_template()
    context = context_block_text(snapshot)
    prompt = gen_objective(template, objective).render({"context": context})

    def _generate() -> str:
        return gateway.complete(CompletionRequest(
            role=Role.GENERATOR, parts=(TextPart(prompt),),
        )).raw_text

    parallel = not gateway.requires_serial(Role.GENERATOR)
    cap = gateway.in_flight_cap(Role.GENERATOR)
    outcomes = fan_out([_generate] * pool_size, parallel=parallel, max_workers=cap)
    pool: list[str] = []
    for outcome in outcomes:
        if isinstance(outcome, Exception):
            raise outcome
        pool.append(str(outcome))

    if pool_size > 1:
        eval_parallel = not gateway.requires_serial(Role.EVALUATOR)
        eval_cap = gateway.in_flight_cap(Role.EVALUATOR)
        tasks = [(lambda c=c: score(c, objective, gateway)) for c in pool]
        score_outcomes = fan_out(tasks, parallel=eval_parallel, max_workers=eval_cap)
        scores: list[float] = []
        for outcome in score_outcomes:
            if isinstance(outcome, Exception):
                raise outcome
            scores.append(float(outcome))
    else:
        scores = [0.0]

    rows = []
    for n in n_values:
        best = argmax_lowest_index(list(enumerate(scores[:n])))
        rows.append({"n": n, "selected_index": best, "selected_score": scores[best]})

    comparisons = []
    rng = random.Random(f"{seed}:{snapshot.snapshot_id}:bon")
    for i in range(len(rows)):
        for j in range(i + 1, len(rows)):
            a, b = rows[i], rows[j]
            verdict = _judge(
                objective,
                pool[a["selected_index"]],
                pool[b["selected_index"]],
                gateway, rng,
                labels=(f"n={a['n']}", f"n={b['n']}"),
            )
            comparisons.append({
                "n_low": a["n"], "n_high": b["n"], "winner": verdict.winner,
            })

    return {
        "snapshot": snapshot.snapshot_id,
        "pool_size": pool_size,
        "scores": scores,
        "rows": rows,
        "comparisons": comparisons,
    }


# --- corpus runner -------------------------------------------------------------


@dataclass
class CorpusItem:
    item_id: str
    snapshot: ContextSnapshot
    objective: Objective


def load_corpus(corpus_dir: str | Path) -> list[CorpusItem]:
    """Corpus items are JSON files: {"id"?, "text", "source_hint"?,
    "objective": {"name", "description", "weight"}}."""
    items = []
    for path in sorted(Path(corpus_dir).glob("*.json")):
        raw = json.loads(path.read_text(encoding="utf-8"))
        snapshot = ingest(text=raw["text"], source_hint=raw.get("source_hint"))
        items.append(CorpusItem(
            item_id=raw.get("id", path.stem),
            snapshot=snapshot,
            objective=Objective.from_dict(raw["objective"]),
        ))
    if not items:
        raise EngineError(f"no corpus items found under {corpus_dir}")
    return items


def _corpus_parallel(gateway: ProviderGateway) -> bool:
    return not any(gateway.requires_serial(role) for role in gateway.configs)


def _run_items(items: list[CorpusItem], gateway: ProviderGateway, worker) -> list[dict]:
    """Corpus items run concurrently (stages within an item stay sequential)
    unless an ordered scripted transcript forces a serial replay."""
    tasks = [(lambda item=item: worker(item)) for item in items]
    outcomes = fan_out(tasks, parallel=_corpus_parallel(gateway),
                       max_workers=min(8, len(items)))
    results = []
    for item, outcome in zip(items, outcomes):
        if isinstance(outcome, Exception):
            raise outcome
        record = dict(outcome)
        record["item"] = item.item_id
        results.append(record)
    return results


def run_compare(
    corpus_dir: str | Path,
    gateway: ProviderGateway,
    report_path: str | Path,
    seed: int = 0,
) -> dict:
    items = load_corpus(corpus_dir)
    results = _run_items(
        items, gateway,
        lambda item: compare(item.snapshot, item.objective, gateway, seed=seed),
    )

    wins = sum(1 for r in results if r["winner"] == "jit")
    losses = sum(1 for r in results if r["winner"] == "baseline")
    invalid = sum(1 for r in results if r["winner"] == "invalid")
    valid = wins + losses
    summary = {
        "judge": JUDGE_LABEL,
        "items": len(results),
        "wins": wins,
        "losses": losses,
        "invalid": invalid,
        "win_rate": (wins / valid) if valid else None,
    }
    _write_report(report_path, results, summary,
                  columns=("item", "winner", "order_flipped"))
    return {"summary": summary, "results": results}


def run_bon(
    corpus_dir: str | Path,
    gateway: ProviderGateway,
    report_path: str | Path,
    n_values: list[int] | None = None,
    seed: int = 0,
) -> dict:
    items = load_corpus(corpus_dir)
    n_values = n_values or [1, 10]
    results = _run_items(
        items, gateway,
        lambda item: bon_curve(item.snapshot, item.objective, n_values, gateway,
                               seed=seed),
    )
    rows = []
    for curve in results:
        for row in curve["rows"]:
            rows.append({"item": curve["item"], **row})

    higher_wins = 0
    decided = 0
    for curve in results:
        for cmp_row in curve["comparisons"]:
            if cmp_row["winner"] == "invalid":
                continue
            decided += 1
            if cmp_row["winner"] == f"n={cmp_row['n_high']}":
                higher_wins += 1
    summary = {
        "judge": JUDGE_LABEL,
        "items": len(results),
        "n_values": n_values,
        "pairwise_decided": decided,
        "higher_n_wins": higher_wins,
        "higher_n_win_rate": (higher_wins / decided) if decided else None,
    }
    _write_report(report_path, rows, summary,
                  columns=("item", "n", "selected_index", "selected_score"))
    return {"summary": summary, "results": results}


def _write_report(report_path: str | Path, rows: list[dict], summary: dict,
                  columns: tuple[str, ...]) -> None:
    report_path = Path(report_path)
    report_path.parent.mkdir(parents=True, exist_ok=True)
    with report_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(columns), extrasaction="ignore")
        writer.writeheader()
        writer.writerows(rows)
    summary_path = report_path.with_suffix(".summary.json")
    summary_path.write_text(json.dumps(summary, indent=2, sort_keys=True),
                            encoding="utf-8")
