"""Command-line surface mirroring the HTTP API.

Every pipeline command runs through the same engine and job machinery the
service uses, so CLI runs persist, audit, and recover identically.
"""

from __future__ import annotations

import json
import mimetypes
import time
from pathlib import Path

import click

from .audit import CallLog
from .context import Attachment
from .gateway import ProviderGateway
from .harness import run_bon, run_compare
from .jobs import Engine
from .server import DATA_DIR_ENV, PROVIDERS_ENV


def build_engine(data_dir: str, providers: str) -> Engine:
    gateway = ProviderGateway.from_config_file(providers, call_log=CallLog())
    return Engine(data_dir, gateway)


def wait_for(engine: Engine, job_id: str, timeout: float = 600.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        job = engine.get_job(job_id)
        if job.state in ("done", "failed"):
            return job
        time.sleep(0.05)
    raise click.ClickException(f"timed out waiting for job {job_id}")


def finish(engine: Engine, job_id: str):
    job = wait_for(engine, job_id)
    if job.state == "failed":
        engine.shutdown()
        raise click.ClickException(f"job {job_id} failed: {job.error}")
    return job


def echo_json(value) -> None:
    click.echo(json.dumps(value, indent=2, sort_keys=True))


@click.group()
@click.option("--data-dir", envvar=DATA_DIR_ENV, default="./data", show_default=True,
              help="Engine state directory.")
@click.option("--providers", envvar=PROVIDERS_ENV, required=True,
              help="Provider configuration JSON (role map).")
@click.pass_context
def main(ctx: click.Context, data_dir: str, providers: str) -> None:
    """Objective induction and steering engine."""
    ctx.ensure_object(dict)
    ctx.obj["data_dir"] = data_dir
    ctx.obj["providers"] = providers


def engine_from(ctx: click.Context) -> Engine:
    return build_engine(ctx.obj["data_dir"], ctx.obj["providers"])


def objective_ref(engine: Engine, snapshot_id: str, set_id: str | None,
                  index: int) -> dict:
    if set_id:
        return {"set": set_id, "index": index}
    latest = engine.objective_sets.latest_for_snapshot(snapshot_id)
    if latest is None:
        raise click.ClickException(
            f"no objective set found for snapshot {snapshot_id}; run `induce` first"
        )
    return {"set": latest.set_id, "index": index}


# --- sessions ------------------------------------------------------------------


@main.group()
def sessions() -> None:
    """Create and inspect sessions."""


@sessions.command("create")
@click.pass_context
def sessions_create(ctx: click.Context) -> None:
    engine = engine_from(ctx)
    echo_json(engine.create_session().to_dict())
    engine.shutdown()


@sessions.command("show")
@click.argument("session_id")
@click.pass_context
def sessions_show(ctx: click.Context, session_id: str) -> None:
    engine = engine_from(ctx)
    echo_json(engine.get_session(session_id).to_dict())
    engine.shutdown()


# --- snapshots --------------------------------------------------------------------


@main.group()
def snapshot() -> None:
    """Ingest and inspect context snapshots."""


@snapshot.command("create")
@click.option("--text", default=None, help="Inline text content.")
@click.option("--text-file", type=click.Path(exists=True, path_type=Path),
              default=None, help="File whose content becomes the text context.")
@click.option("--image", type=click.Path(exists=True, path_type=Path), default=None,
              help="Screenshot or other image for multimodal induction.")
@click.option("--attach", "attachments", type=click.Path(exists=True, path_type=Path),
              multiple=True, help="Attachment file (repeatable).")
@click.option("--source-hint", default=None)
@click.option("--session", "session_id", default=None)
@click.pass_context
def snapshot_create(ctx, text, text_file, image, attachments, source_hint, session_id):
    engine = engine_from(ctx)
    if text_file is not None:
        text = text_file.read_text(encoding="utf-8")
    image_bytes = image.read_bytes() if image else None
    image_media = mimetypes.guess_type(str(image))[0] if image else "image/png"
    attachment_objs = []
    for path in attachments:
        media = mimetypes.guess_type(str(path))[0] or "application/octet-stream"
        attachment_objs.append(Attachment(path.name, media, path.read_bytes()))
    snap = engine.create_snapshot(
        text=text, image=image_bytes, image_media_type=image_media or "image/png",
        attachments=attachment_objs, source_hint=source_hint, session_id=session_id,
    )
    echo_json({"snapshot_id": snap.snapshot_id, "truncated": snap.truncated})
    engine.shutdown()


@snapshot.command("show")
@click.argument("snapshot_id")
@click.pass_context
def snapshot_show(ctx, snapshot_id):
    engine = engine_from(ctx)
    snap = engine.get_snapshot(snapshot_id)
    echo_json({
        "snapshot_id": snap.snapshot_id,
        "text_content": snap.text_content,
        "has_image": snap.image is not None,
        "attachments": [a.filename for a in snap.attachments],
        "source_hint": snap.source_hint,
        "truncated": snap.truncated,
    })
    engine.shutdown()


# --- induce -----------------------------------------------------------------------


@main.command()
@click.option("--snapshot", "snapshot_id", required=True)
@click.option("--limit", default=3, show_default=True)
@click.option("--meta", type=click.Path(exists=True, path_type=Path), default=None,
              help="File with extra induction steering instructions.")
@click.option("--session", "session_id", default=None)
@click.pass_context
def induce(ctx, snapshot_id, limit, meta, session_id):
    """Induce a weighted objective set from a snapshot."""
    engine = engine_from(ctx)
    session_id = session_id or engine.create_session().session_id
    config = {"limit": limit}
    if meta is not None:
        config["meta_instructions"] = meta.read_text(encoding="utf-8")
    job = engine.start_job(session_id, "induce",
                           {"snapshot": snapshot_id, "config": config})
    finished = finish(engine, job.job_id)
    result = dict(finished.result)
    # Reasoning is read-only context for the operator; keep it visible but last.
    reasoning = result.pop("reasoning", "")
    echo_json(result)
    if reasoning:
        click.echo("\n# reasoning trace", err=True)
        click.echo(reasoning, err=True)
    engine.shutdown()


# --- experts -------------------------------------------------------------------------


@main.group()
def experts() -> None:
    """Expert-conditioned assistance."""


@experts.command("run")
@click.option("--snapshot", "snapshot_id", required=True)
@click.option("--objective", "index", type=int, default=0, show_default=True,
              help="Objective index within the set.")
@click.option("--set", "set_id", default=None,
              help="Objective set id (default: latest for the snapshot).")
@click.option("--format", "output_format",
              type=click.Choice(["auto", "feedback", "brainstorm", "line-editor"]),
              default="auto", show_default=True)
@click.option("--limit", default=3, show_default=True)
@click.option("--keep", default=3, show_default=True)
@click.option("--user-input", default=None)
@click.option("--highlight", default=None)
@click.option("--session", "session_id", default=None)
@click.pass_context
def experts_run(ctx, snapshot_id, index, set_id, output_format, limit, keep,
                user_input, highlight, session_id):
    engine = engine_from(ctx)
    session_id = session_id or engine.create_session().session_id
    fmt = {"auto": "auto", "feedback": "Feedback", "brainstorm": "Brainstorm",
           "line-editor": "LineEditor"}[output_format]
    job = engine.start_job(session_id, "experts", {
        "snapshot": snapshot_id,
        "objective": objective_ref(engine, snapshot_id, set_id, index),
        "config": {"limit": limit, "keep": keep, "format": fmt,
                   "user_input": user_input, "highlight": highlight},
    })
    finished = finish(engine, job.job_id)
    echo_json(finished.result)
    engine.shutdown()


# --- tools ------------------------------------------------------------------------------


@main.group()
def tools() -> None:
    """Generated interactive tools."""


@tools.command("run")
@click.option("--snapshot", "snapshot_id", required=True)
@click.option("--objective", "index", type=int, default=0, show_default=True)
@click.option("--set", "set_id", default=None)
@click.option("--with-experts", is_flag=True, default=False)
@click.option("--rounds", default=1, show_default=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.option("--session", "session_id", default=None)
@click.pass_context
def tools_run(ctx, snapshot_id, index, set_id, with_experts, rounds, out, session_id):
    engine = engine_from(ctx)
    session_id = session_id or engine.create_session().session_id
    job = engine.start_job(session_id, "tools", {
        "snapshot": snapshot_id,
        "objective": objective_ref(engine, snapshot_id, set_id, index),
        "config": {"with_experts": with_experts, "rounds": rounds},
    })
    finished = finish(engine, job.job_id)
    result = finished.result
    out.mkdir(parents=True, exist_ok=True)
    (out / "design.json").write_text(
        json.dumps(result["design"], indent=2, sort_keys=True), encoding="utf-8")
    (out / "tool.html").write_text(result["code"], encoding="utf-8")
    (out / "critique_history.json").write_text(
        json.dumps(result["critique_history"], indent=2, sort_keys=True),
        encoding="utf-8")
    echo_json({
        "job_id": finished.job_id,
        "design": result["design"]["name"],
        "out": str(out),
        "warnings": finished.warnings,
    })
    engine.shutdown()


# --- jobs / objectives (endpoint mirrors) ------------------------------------------------


@main.group()
def jobs() -> None:
    """Start and poll jobs directly."""


@jobs.command("start")
@click.option("--session", "session_id", required=True)
@click.option("--kind", type=click.Choice(["induce", "experts", "tools", "best_of_n"]),
              required=True)
@click.option("--snapshot", "snapshot_id", required=True)
@click.option("--set", "set_id", default=None)
@click.option("--index", type=int, default=0)
@click.option("--config", "config_json", default="{}")
@click.pass_context
def jobs_start(ctx, session_id, kind, snapshot_id, set_id, index, config_json):
    engine = engine_from(ctx)
    inputs = {"snapshot": snapshot_id, "config": json.loads(config_json)}
    if kind != "induce":
        inputs["objective"] = objective_ref(engine, snapshot_id, set_id, index)
    job = engine.start_job(session_id, kind, inputs)
    finished = wait_for(engine, job.job_id)
    echo_json(finished.to_dict())
    engine.shutdown()


@jobs.command("poll")
@click.argument("job_id")
@click.pass_context
def jobs_poll(ctx, job_id):
    engine = engine_from(ctx)
    echo_json(engine.get_job(job_id).to_dict())
    engine.shutdown()


@main.group()
def objectives() -> None:
    """Inspect and edit induced objectives."""


@objectives.command("list")
@click.option("--session", "session_id", required=True)
@click.pass_context
def objectives_list(ctx, session_id):
    engine = engine_from(ctx)
    echo_json(engine.list_objectives(session_id))
    engine.shutdown()


@objectives.command("edit")
@click.option("--session", "session_id", required=True)
@click.option("--set", "set_id", required=True)
@click.option("--index", type=int, required=True)
@click.option("--name", default=None)
@click.option("--description", default=None)
@click.option("--weight", type=int, default=None)
@click.pass_context
def objectives_edit(ctx, session_id, set_id, index, name, description, weight):
    engine = engine_from(ctx)
    override = engine.edit_objective(session_id, set_id, index, {
        "name": name, "description": description, "weight": weight,
    })
    echo_json(override)
    engine.shutdown()


# --- eval -----------------------------------------------------------------------------------


@main.group(name="eval")
def eval_group() -> None:
    """Replay-based evaluation."""


@eval_group.command("compare")
@click.option("--corpus", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--report", type=click.Path(path_type=Path), required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.pass_context
def eval_compare(ctx, corpus, report, seed):
    gateway = ProviderGateway.from_config_file(ctx.obj["providers"])
    outcome = run_compare(corpus, gateway, report, seed=seed)
    echo_json(outcome["summary"])


@eval_group.command("bon")
@click.option("--corpus", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--report", type=click.Path(path_type=Path), required=True)
@click.option("--n", "n_values", default="1,10", show_default=True,
              help="Comma-separated sample sizes.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.pass_context
def eval_bon(ctx, corpus, report, n_values, seed):
    gateway = ProviderGateway.from_config_file(ctx.obj["providers"])
    sizes = [int(x) for x in n_values.split(",") if x.strip()]
    outcome = run_bon(corpus, gateway, report, n_values=sizes, seed=seed)
    echo_json(outcome["summary"])


# --- serve ------------------------------------------------------------------------------------


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8600, show_default=True)
@click.pass_context
def serve(ctx, host, port):
    """Run the HTTP service."""
    import uvicorn

    from .server import create_app

    app = create_app(data_dir=ctx.obj["data_dir"],
                     providers_path=ctx.obj["providers"])
    uvicorn.run(app, host=host, port=port, log_level="info")


if __name__ == "__main__":  # pragma: no cover
    main()
