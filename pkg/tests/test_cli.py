"""CLI flows over the golden scripted providers."""

from __future__ import annotations

import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from jitsteer.cli import main

GOLDEN = Path(__file__).parent / "data" / "golden"

EXPERTS_CONTEXT = (
    "Working on the System section of the paper draft: the engine induces "
    "user goals from a context capture and applies them to steer generation."
)
TOOLS_CONTEXT = (
    "Laying out the architecture figure on the design canvas: components, "
    "arrows, and labels for the pipeline."
)


@pytest.fixture
def env(tmp_path):
    return {
        "JITSTEER_DATA_DIR": str(tmp_path / "data"),
        "JITSTEER_PROVIDERS": str(GOLDEN / "providers.json"),
    }


def invoke(env, *args, expect_exit=0):
    runner = CliRunner()
    result = runner.invoke(main, list(args), env=env, catch_exceptions=False)
    assert result.exit_code == expect_exit, result.output + (result.stderr or "")
    return result


def create_snapshot(env, text):
    result = invoke(env, "snapshot", "create", "--text", text)
    return json.loads(result.stdout)["snapshot_id"]


def test_snapshot_create_and_show(env):
    snapshot_id = create_snapshot(env, EXPERTS_CONTEXT)
    result = invoke(env, "snapshot", "show", snapshot_id)
    assert json.loads(result.stdout)["text_content"] == EXPERTS_CONTEXT


def test_induce_prints_objective_set(env):
    snapshot_id = create_snapshot(env, EXPERTS_CONTEXT)
    result = invoke(env, "induce", "--snapshot", snapshot_id, "--limit", "3")
    doc = json.loads(result.stdout)
    assert [o["name"] for o in doc["objectives"]] == [
        "Enhance technical clarity",
        "Strengthen evaluation presentation",
    ]
    assert [o["weight"] for o in doc["objectives"]] == [9, 8]
    # Reasoning trace surfaces on stderr, read-only.
    assert "Step 0" in result.stderr


def test_experts_run_full_flow(env):
    snapshot_id = create_snapshot(env, EXPERTS_CONTEXT)
    invoke(env, "induce", "--snapshot", snapshot_id)
    result = invoke(env, "experts", "run", "--snapshot", snapshot_id,
                    "--objective", "0", "--format", "auto")
    doc = json.loads(result.stdout)
    assert doc["format"] == "Feedback"
    assert [e["name"] for e in doc["experts"]] == [
        "Technical Writing Specialist",
        "Systems Architecture Expert",
        "Human-AI Interaction Researcher",
    ]
    assert len(doc["sections"]) == 3
    assert doc["synthesis"]


def test_tools_run_writes_artifacts(env, tmp_path):
    snapshot_id = create_snapshot(env, TOOLS_CONTEXT)
    invoke(env, "induce", "--snapshot", snapshot_id)
    out = tmp_path / "tool-out"
    result = invoke(env, "tools", "run", "--snapshot", snapshot_id,
                    "--objective", "0", "--rounds", "1", "--out", str(out))
    summary = json.loads(result.stdout)
    assert summary["design"] == "Component Relationship Diagram Builder"
    assert (out / "tool.html").exists()
    assert (out / "design.json").exists()
    history = json.loads((out / "critique_history.json").read_text())
    assert len(history) == 1 and history[0]["accepted"]
    assert "insights-loading" in (out / "tool.html").read_text()


def test_objectives_list_and_edit(env):
    snapshot_id = create_snapshot(env, EXPERTS_CONTEXT)
    session = json.loads(invoke(env, "sessions", "create").stdout)["session_id"]
    invoke(env, "induce", "--snapshot", snapshot_id, "--session", session)
    listing = json.loads(invoke(env, "objectives", "list", "--session", session).stdout)
    set_id = listing[0]["set_id"]
    edited = json.loads(invoke(
        env, "objectives", "edit", "--session", session,
        "--set", set_id, "--index", "0", "--weight", "10",
    ).stdout)
    assert edited["objective"]["weight"] == 10
    assert edited["original"]["weight"] == 9


def test_eval_compare_over_corpus(env, tmp_path):
    corpus = tmp_path / "corpus"
    corpus.mkdir()
    for i in range(3):
        (corpus / f"i{i}.json").write_text(json.dumps({
            "text": f"Corpus draft {i}",
            "objective": {"name": "Improve it", "description": "Make it better.",
                          "weight": 7},
        }))
    providers = {
        "generator": {"provider": "scripted", "transcript": "gen.json",
                      "strictness": "matched"},
        "evaluator": {"provider": "scripted", "transcript": "eval.json",
                      "strictness": "matched"},
    }
    (tmp_path / "gen.json").write_text(json.dumps([
        {"match": "GOALS", "response": f"JIT-{i}"} for i in range(3)
    ] + [
        {"match": "", "response": f"BASE-{i}"} for i in range(3)
    ]))
    (tmp_path / "eval.json").write_text(json.dumps([
        {"match": f"OPTION A:\nJIT-{i}", "response": "A"} for i in range(3)
    ] + [
        {"match": f"OPTION B:\nJIT-{i}", "response": "B"} for i in range(3)
    ]))
    (tmp_path / "providers.json").write_text(json.dumps(providers))

    report = tmp_path / "report.csv"
    local_env = dict(env)
    local_env["JITSTEER_PROVIDERS"] = str(tmp_path / "providers.json")
    result = invoke(local_env, "eval", "compare", "--corpus", str(corpus),
                    "--report", str(report))
    summary = json.loads(result.stdout)
    assert summary["win_rate"] == 1.0
    assert report.exists()
    assert report.with_suffix(".summary.json").exists()


def test_failed_job_is_a_cli_error(env, tmp_path):
    bad = tmp_path / "bad-providers.json"
    bad.write_text(json.dumps({
        "inducer": {"provider": "scripted", "transcript": "missing-transcript.json"},
    }))
    local_env = dict(env)
    local_env["JITSTEER_PROVIDERS"] = str(bad)
    runner = CliRunner()
    result = runner.invoke(main, ["snapshot", "create", "--text", "x"], env=local_env)
    assert result.exit_code != 0
