/**
 * Typed client for the engine HTTP API.
 *
 * Every mutation the console performs goes through this module; nothing else
 * touches the network. Errors carry the engine's {error, detail} body so the
 * UI can react to specific codes (409 while a consuming job runs, 422 on an
 * invalid edit).
 */

export interface ObjectiveFields {
  name: string;
  description: string;
  weight: number;
}

export interface ObjectiveEntry {
  index: number;
  objective: ObjectiveFields;
  original: ObjectiveFields | null;
  edited: boolean;
}

export interface ObjectiveSetView {
  set_id: string;
  source_snapshot: string;
  reasoning: string;
  objectives: ObjectiveEntry[];
}

export interface Job {
  job_id: string;
  kind: string;
  session_id: string;
  state: "queued" | "running" | "degraded" | "done" | "failed";
  result: Record<string, unknown> | null;
  warnings: string[];
  error: string | null;
  resolved_objective: Record<string, unknown> | null;
}

export interface CallRecord {
  job_id: string;
  role: string;
  prompt: string;
  prompt_hash: string;
  attempt: number;
}

export interface ToolResult {
  design: { name: string; description: string };
  experts: { name: string; description: string }[];
  code: string;
  critique_history: { critique: string; accepted: boolean }[];
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    detail: string,
  ) {
    super(detail);
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class EngineApi {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method, headers: {} };
    if (body !== undefined) {
      init.headers = { "content-type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const response = await this.fetchFn(this.baseUrl + path, init);
    const payload = await response.json().catch(() => ({}));
    if (!response.ok) {
      throw new ApiError(
        response.status,
        (payload as { error?: string }).error ?? "UnknownError",
        (payload as { detail?: string }).detail ?? response.statusText,
      );
    }
    return payload as T;
  }

  createSession(): Promise<{ session_id: string }> {
    return this.request("POST", "/sessions");
  }

  getSession(sessionId: string): Promise<{ session_id: string; jobs: string[] }> {
    return this.request("GET", `/sessions/${sessionId}`);
  }

  createSnapshot(body: {
    text?: string;
    image_b64?: string;
    image_media_type?: string;
    source_hint?: string;
    session?: string;
  }): Promise<{ snapshot_id: string; truncated: boolean }> {
    return this.request("POST", "/snapshots", body);
  }

  listObjectives(sessionId: string): Promise<{ sets: ObjectiveSetView[] }> {
    return this.request("GET", `/sessions/${sessionId}/objectives`);
  }

  editObjective(
    sessionId: string,
    setId: string,
    index: number,
    fields: Partial<ObjectiveFields>,
  ): Promise<{ objective: ObjectiveFields; original: ObjectiveFields }> {
    return this.request("PATCH", `/sessions/${sessionId}/objectives`, {
      set: setId,
      index,
      ...fields,
    });
  }

  startJob(body: {
    session: string;
    kind: string;
    snapshot: string;
    objective?: { set: string; index: number };
    config?: Record<string, unknown>;
  }): Promise<{ job_id: string; state: string }> {
    return this.request("POST", "/jobs", body);
  }

  getJob(jobId: string): Promise<Job> {
    return this.request("GET", `/jobs/${jobId}`);
  }

  getJobCalls(jobId: string): Promise<{ calls: CallRecord[] }> {
    return this.request("GET", `/jobs/${jobId}/calls`);
  }

  helperCall(runId: string, name: string, args: unknown[]): Promise<{ result: string }> {
    return this.request("POST", `/runs/${runId}/helpers/${name}`, { args });
  }
}
