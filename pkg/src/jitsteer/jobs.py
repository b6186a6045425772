"""Job lifecycle, sessions, and the engine that executes pipeline runs.

Jobs move queued -> running -> {done, failed}, with degraded reachable from
running (a run that produced warnings) and terminating in done. Everything is
persisted as JSON under the data directory with atomic writes, so a crashed
process restarts cleanly: terminal jobs are untouched and in-flight jobs
resurface as failed with a restart warning.
"""

from __future__ import annotations

import json
import logging
import threading
import time
import uuid
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .audit import current_job_id
from .context import (
    Attachment,
    ContextSnapshot,
    Objective,
    ObjectiveSet,
    ObjectiveSetStore,
    SnapshotStore,
    context_block_text,
    ingest,
)
from .errors import Conflict, EngineError, InvalidEdit, NotFound
from .experts import (
    enrich_expert,
    propose_experts,
    run_experts,
    select_experts,
    select_output_format,
)
from .gateway import CompletionRequest, ProviderGateway, Role, TextPart
from .induction import Inducer, InductionConfig
from .steering import best_of_n, fan_out
from .storage import DataDir, read_json, write_json_atomic
from .templates import feedback_generator_template
from .tools import critique_and_refine, propose_tools, select_tool, synthesize_ui

logger = logging.getLogger(__name__)

JOB_KINDS = ("induce", "experts", "tools", "best_of_n")

TRANSITIONS = {
    "queued": {"running"},
    "running": {"degraded", "done", "failed"},
    "degraded": {"done", "failed"},
    "done": set(),
    "failed": set(),
}

TERMINAL_STATES = ("done", "failed")

RESTART_WARNING = "service restarted while this job was in flight"


@dataclass
class Job:
    job_id: str
    kind: str
    session_id: str
    inputs: dict
    state: str = "queued"
    created_at: float = field(default_factory=time.time)
    updated_at: float = field(default_factory=time.time)
    result: dict | None = None
    warnings: list[str] = field(default_factory=list)
    error: str | None = None
    resolved_objective: dict | None = None

    def transition(self, new_state: str) -> None:
        if new_state not in TRANSITIONS[self.state]:
            raise EngineError(f"illegal job transition {self.state} -> {new_state}")
        self.state = new_state
        self.updated_at = time.time()

    def to_dict(self) -> dict:
        return {
            "job_id": self.job_id,
            "kind": self.kind,
            "session_id": self.session_id,
            "inputs": self.inputs,
            "state": self.state,
            "created_at": self.created_at,
            "updated_at": self.updated_at,
            "result": self.result,
            "warnings": self.warnings,
            "error": self.error,
            "resolved_objective": self.resolved_objective,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "Job":
        return cls(
            job_id=raw["job_id"],
            kind=raw["kind"],
            session_id=raw.get("session_id", ""),
            inputs=raw.get("inputs", {}),
            state=raw.get("state", "queued"),
            created_at=raw.get("created_at", 0.0),
            updated_at=raw.get("updated_at", 0.0),
            result=raw.get("result"),
            warnings=list(raw.get("warnings", [])),
            error=raw.get("error"),
            resolved_objective=raw.get("resolved_objective"),
        )


@dataclass
class Session:
    session_id: str
    snapshots: list[str] = field(default_factory=list)
    objective_sets: list[str] = field(default_factory=list)
    jobs: list[str] = field(default_factory=list)
    # Edits keyed "set_id:index" -> {"objective": {...}, "original": {...}}
    overrides: dict[str, dict] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "snapshots": self.snapshots,
            "objective_sets": self.objective_sets,
            "jobs": self.jobs,
            "overrides": self.overrides,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "Session":
        return cls(
            session_id=raw["session_id"],
            snapshots=list(raw.get("snapshots", [])),
            objective_sets=list(raw.get("objective_sets", [])),
            jobs=list(raw.get("jobs", [])),
            overrides=dict(raw.get("overrides", {})),
        )


class JobStore:
    def __init__(self, root: Path) -> None:
        self.root = root

    def save(self, job: Job) -> None:
        write_json_atomic(self.root / f"{job.job_id}.json", job.to_dict())

    def load(self, job_id: str) -> Job:
        path = self.root / f"{job_id}.json"
        if not path.exists():
            raise NotFound(f"no job {job_id}")
        raw = read_json(path)
        assert isinstance(raw, dict)
        return Job.from_dict(raw)

    def list_all(self) -> list[Job]:
        if not self.root.exists():
            return []
        return [self.load(p.stem) for p in sorted(self.root.glob("*.json"))]


class SessionStore:
    def __init__(self, root: Path) -> None:
        self.root = root

    def save(self, session: Session) -> None:
        write_json_atomic(self.root / f"{session.session_id}.json", session.to_dict())

    def load(self, session_id: str) -> Session:
        path = self.root / f"{session_id}.json"
        if not path.exists():
            raise NotFound(f"no session {session_id}")
        raw = read_json(path)
        assert isinstance(raw, dict)
        return Session.from_dict(raw)

    def list_ids(self) -> list[str]:
        if not self.root.exists():
            return []
        return sorted(p.stem for p in self.root.glob("*.json"))


class Engine:
    """Owns the stores, the gateway, and the worker pool that runs jobs."""

    def __init__(self, data_dir: str | Path, gateway: ProviderGateway,
                 max_workers: int = 8) -> None:
        self.data = DataDir(data_dir).ensure()
        self.gateway = gateway
        if gateway.call_log.path is None:
            gateway.call_log.path = self.data.call_log_path
        self.snapshots = SnapshotStore(self.data.snapshots)
        self.objective_sets = ObjectiveSetStore(self.data.objective_sets)
        self.jobs = JobStore(self.data.jobs)
        self.sessions = SessionStore(self.data.sessions)
        self.inducer = Inducer(gateway, store=self.objective_sets)
        self._pool = ThreadPoolExecutor(max_workers=max_workers)
        self._session_locks: dict[str, threading.Lock] = defaultdict(threading.Lock)
        self._jobs_lock = threading.Lock()
        self.recover()

    # -- restart recovery ----------------------------------------------------

    def recover(self) -> None:
        """Mark any job persisted in a non-terminal state as failed."""
        for job in self.jobs.list_all():
            if job.state not in TERMINAL_STATES:
                job.state = "failed"
                job.error = job.error or RESTART_WARNING
                job.warnings.append(RESTART_WARNING)
                job.updated_at = time.time()
                self.jobs.save(job)

    def shutdown(self, wait: bool = True) -> None:
        self._pool.shutdown(wait=wait)

    # -- sessions / snapshots -------------------------------------------------

    def create_session(self) -> Session:
        session = Session(session_id=uuid.uuid4().hex[:12])
        self.sessions.save(session)
        return session

    def get_session(self, session_id: str) -> Session:
        return self.sessions.load(session_id)

    def create_snapshot(
        self,
        text: str | None = None,
        image: bytes | None = None,
        image_media_type: str = "image/png",
        attachments: list[Attachment] | None = None,
        source_hint: str | None = None,
        session_id: str | None = None,
    ) -> ContextSnapshot:
        snapshot = ingest(
            text=text, image=image, image_media_type=image_media_type,
            attachments=attachments, source_hint=source_hint,
            captured_at=time.time(),
        )
        self.snapshots.save(snapshot)
        if session_id:
            with self._session_locks[session_id]:
                session = self.sessions.load(session_id)
                if snapshot.snapshot_id not in session.snapshots:
                    session.snapshots.append(snapshot.snapshot_id)
                    self.sessions.save(session)
        return snapshot

    def get_snapshot(self, snapshot_id: str) -> ContextSnapshot:
        try:
            return self.snapshots.load(snapshot_id)
        except FileNotFoundError:
            raise NotFound(f"no snapshot {snapshot_id}") from None

    # -- objectives -------------------------------------------------------------

    def list_objectives(self, session_id: str) -> list[dict]:
        session = self.sessions.load(session_id)
        views = []
        for set_id in session.objective_sets:
            objective_set = self.objective_sets.load(set_id)
            objectives = []
            for index, objective in enumerate(objective_set.objectives):
                override = session.overrides.get(f"{set_id}:{index}")
                objectives.append({
                    "index": index,
                    "objective": (override["objective"] if override
                                  else objective.to_dict()),
                    "original": override["original"] if override else None,
                    "edited": override is not None,
                })
            views.append({
                "set_id": set_id,
                "source_snapshot": objective_set.source_snapshot,
                "reasoning": objective_set.reasoning_trace,
                "objectives": objectives,
            })
        return views

    def edit_objective(self, session_id: str, set_id: str, index: int,
                       fields: dict) -> dict:
        with self._session_locks[session_id]:
            session = self.sessions.load(session_id)
            if set_id not in session.objective_sets:
                raise NotFound(f"session has no objective set {set_id}")
            objective_set = self.objective_sets.load(set_id)
            if not (0 <= index < len(objective_set.objectives)):
                raise NotFound(f"objective set {set_id} has no index {index}")
            if self._consuming_job_running(session, set_id, index):
                raise Conflict(
                    f"a job consuming objective {set_id}:{index} is running"
                )
            key = f"{set_id}:{index}"
            current = (session.overrides[key]["objective"]
                       if key in session.overrides
                       else objective_set.objectives[index].to_dict())
            merged = dict(current)
            for name in ("name", "description", "weight"):
                if name in fields and fields[name] is not None:
                    merged[name] = fields[name]
            try:
                edited = Objective.from_dict(merged)
            except EngineError as exc:
                raise InvalidEdit(str(exc)) from exc
            session.overrides[key] = {
                "objective": edited.to_dict(),
                "original": objective_set.objectives[index].to_dict(),
            }
            self.sessions.save(session)
            return session.overrides[key]

    def _consuming_job_running(self, session: Session, set_id: str, index: int) -> bool:
        for job_id in session.jobs:
            try:
                job = self.jobs.load(job_id)
            except NotFound:
                continue
            if job.state in TERMINAL_STATES:
                continue
            ref = job.inputs.get("objective") or {}
            if ref.get("set") == set_id and ref.get("index") == index:
                return True
        return False

    def resolve_objective(self, session: Session, ref: dict) -> tuple[Objective, dict]:
        """Objective a job will actually use, plus its audit record. Session
        edits take precedence over the induced values."""
        if "name" in ref:  # literal objective
            objective = Objective.from_dict(ref)
            return objective, {"used": objective.to_dict(), "edited": False,
                               "original": None}
        set_id, index = ref.get("set", ""), int(ref.get("index", 0))
        if not self.objective_sets.exists(set_id):
            raise NotFound(f"no objective set {set_id}")
        objective_set = self.objective_sets.load(set_id)
        if not (0 <= index < len(objective_set.objectives)):
            raise NotFound(f"objective set {set_id} has no index {index}")
        original = objective_set.objectives[index]
        override = session.overrides.get(f"{set_id}:{index}")
        if override:
            objective = Objective.from_dict(override["objective"])
            return objective, {"used": objective.to_dict(), "edited": True,
                               "original": override["original"]}
        return original, {"used": original.to_dict(), "edited": False,
                          "original": None}

    # -- jobs ---------------------------------------------------------------------

    def start_job(self, session_id: str, kind: str, inputs: dict) -> Job:
        if kind not in JOB_KINDS:
            raise NotFound(f"unknown job kind {kind!r}")
        with self._session_locks[session_id]:
            session = self.sessions.load(session_id)
            snapshot_id = inputs.get("snapshot", "")
            if snapshot_id and not self.snapshots.exists(snapshot_id):
                raise NotFound(f"no snapshot {snapshot_id}")
            if kind != "induce":
                # Resolving validates the objective reference up front.
                self.resolve_objective(session, inputs.get("objective") or {})
            job = Job(
                job_id=uuid.uuid4().hex[:12],
                kind=kind,
                session_id=session_id,
                inputs=inputs,
            )
            self.jobs.save(job)
            session.jobs.append(job.job_id)
            self.sessions.save(session)
        self._pool.submit(self._execute, job)
        return job

    def get_job(self, job_id: str) -> Job:
        return self.jobs.load(job_id)

    def job_calls(self, job_id: str) -> list[dict]:
        self.jobs.load(job_id)  # 404 on unknown ids
        records = []
        path = self.gateway.call_log.path
        if path and path.exists():
            for line in path.read_text(encoding="utf-8").splitlines():
                record = json.loads(line)
                if record.get("job_id") == job_id:
                    records.append(record)
        return records

    def _execute(self, job: Job) -> None:
        token = current_job_id.set(job.job_id)
        try:
            job.transition("running")
            self.jobs.save(job)
            runner = getattr(self, f"_run_{job.kind}")
            result = runner(job)
            if job.warnings and job.state == "running":
                job.transition("degraded")
                self.jobs.save(job)
            # Result becomes visible only together with the done state.
            job.result = result
            job.transition("done")
            self.jobs.save(job)
        except Exception as exc:  # noqa: BLE001 - recorded on the job
            logger.exception("job %s failed", job.job_id)
            job.error = str(exc)
            job.result = None
            try:
                job.transition("failed")
            except EngineError:
                job.state = "failed"
                job.updated_at = time.time()
            self.jobs.save(job)
        finally:
            current_job_id.reset(token)

    # -- job kinds -------------------------------------------------------------

    def _run_induce(self, job: Job) -> dict:
        snapshot = self.get_snapshot(job.inputs["snapshot"])
        config = job.inputs.get("config") or {}
        induction_config = InductionConfig(
            limit=int(config.get("limit", 3)),
            meta_instructions=config.get("meta_instructions"),
        )
        objective_set = self.inducer.induce(snapshot, induction_config)
        with self._session_locks[job.session_id]:
            session = self.sessions.load(job.session_id)
            if objective_set.set_id not in session.objective_sets:
                session.objective_sets.append(objective_set.set_id)
                self.sessions.save(session)
        return objective_set.to_dict()

    def _run_experts(self, job: Job) -> dict:
        snapshot = self.get_snapshot(job.inputs["snapshot"])
        session = self.sessions.load(job.session_id)
        objective, audit = self.resolve_objective(session, job.inputs.get("objective") or {})
        job.resolved_objective = audit
        self.jobs.save(job)
        config = job.inputs.get("config") or {}
        limit = int(config.get("limit", 3))
        keep = int(config.get("keep", 3))

        proposed = propose_experts(snapshot, objective, self.gateway, limit=limit)
        parallel = not self.gateway.requires_serial(Role.SEARCH)
        cap = self.gateway.in_flight_cap(Role.SEARCH) if Role.SEARCH in self.gateway.configs else 1
        tasks = [
            (lambda e=e: enrich_expert(e, objective, self.gateway, warnings=job.warnings))
            for e in proposed
        ]
        outcomes = fan_out(tasks, parallel=parallel, max_workers=cap)
        enriched = []
        for expert, outcome in zip(proposed, outcomes):
            if isinstance(outcome, Exception):
                raise outcome
            enriched.append(outcome)
        selected = select_experts(enriched, objective, self.gateway, keep=keep)

        fmt = config.get("format", "auto")
        if fmt in ("auto", None, ""):
            fmt = select_output_format(snapshot, objective, self.gateway,
                                       warnings=job.warnings)
        document = run_experts(
            snapshot, objective, selected, fmt, self.gateway,
            user_input=config.get("user_input"),
            highlight=config.get("highlight"),
            warnings=job.warnings,
        )
        return document

    def _run_tools(self, job: Job) -> dict:
        snapshot = self.get_snapshot(job.inputs["snapshot"])
        session = self.sessions.load(job.session_id)
        objective, audit = self.resolve_objective(session, job.inputs.get("objective") or {})
        job.resolved_objective = audit
        self.jobs.save(job)
        config = job.inputs.get("config") or {}
        limit = int(config.get("limit", 3))
        rounds = int(config.get("rounds", 1))

        designs = propose_tools(snapshot, objective, self.gateway, limit=limit)
        chosen = select_tool(designs, objective, self.gateway)

        experts: tuple = ()
        if config.get("with_experts"):
            proposed = propose_experts(snapshot, objective, self.gateway,
                                       limit=int(config.get("expert_limit", 3)))
            enriched = [
                enrich_expert(e, objective, self.gateway, warnings=job.warnings)
                for e in proposed
            ]
            experts = tuple(select_experts(enriched, objective, self.gateway,
                                           keep=int(config.get("keep", 3))))

        tool = synthesize_ui(chosen, experts, objective, self.gateway,
                             snapshot=snapshot)
        tool = critique_and_refine(tool, objective, self.gateway, rounds=rounds,
                                   warnings=job.warnings)
        result = tool.to_dict()
        result["designs"] = [d.to_dict() for d in designs]
        return result

    def _run_best_of_n(self, job: Job) -> dict:
        snapshot = self.get_snapshot(job.inputs["snapshot"])
        session = self.sessions.load(job.session_id)
        objective, audit = self.resolve_objective(session, job.inputs.get("objective") or {})
        job.resolved_objective = audit
        self.jobs.save(job)
        config = job.inputs.get("config") or {}
        n = int(config.get("n", 10))
        audit_path = self.data.runs / job.job_id / "candidates.jsonl"
        winner = best_of_n(
            feedback_generator_template(), objective, n, self.gateway,
            fills={"context": context_block_text(snapshot)},
            audit_path=audit_path,
        )
        return {
            "index": winner.index,
            "content": winner.content,
            "score": winner.score,
            "audit": str(audit_path.relative_to(self.data.root)),
        }

    # -- generated-tool helper bridge ------------------------------------------------

    def helper_call(self, run_id: str, name: str, args: list) -> str:
        """Bridge for generated-tool helper invocations.

        getExperts returns a JSON-encoded entity list; promptExpert /
        promptEntity / promptGeneral return model text.
        """
        job = self.jobs.load(run_id)
        if job.result is None:
            raise Conflict(f"job {run_id} has no result to serve helpers from")
        experts = job.result.get("experts", [])
        if name == "getExperts":
            return json.dumps([
                {"id": str(i), "name": e.get("name", ""),
                 "description": e.get("description", "")}
                for i, e in enumerate(experts)
            ])
        if name in ("promptExpert", "promptEntity"):
            if len(args) < 2:
                raise InvalidEdit(f"{name} expects (expertId, prompt)")
            expert = self._find_expert(experts, str(args[0]))
            prompt = (
                f"You are responding as {expert.get('name', '')} "
                f"({expert.get('description', '')}).\n"
                f"Background:\n{expert.get('background', '')}\n\n{args[1]}"
            )
            result = self.gateway.complete(CompletionRequest(
                role=Role.GENERATOR, parts=(TextPart(prompt),),
            ))
            return result.raw_text
        if name == "promptGeneral":
            if len(args) < 1:
                raise InvalidEdit("promptGeneral expects (prompt)")
            result = self.gateway.complete(CompletionRequest(
                role=Role.GENERATOR, parts=(TextPart(str(args[0])),),
            ))
            return result.raw_text
        raise NotFound(f"unknown helper {name!r}")

    @staticmethod
    def _find_expert(experts: list[dict], expert_id: str) -> dict:
        if expert_id.isdigit() and int(expert_id) < len(experts):
            return experts[int(expert_id)]
        for e in experts:
            if e.get("name") == expert_id:
                return e
        raise NotFound(f"no expert {expert_id!r} in this run")
