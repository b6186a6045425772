/**
 * Page wiring: one session per browser tab, a context upload form, the
 * objective editor, a job launcher with per-job polling, and detail panes
 * for results, prompt audits, and sandboxed generated tools.
 */

import { EngineApi, Job, ToolResult } from "./api.js";
import { loadAuditView } from "./audit.js";
import { ObjectiveEditor } from "./objectives.js";
import { pollJob } from "./poll.js";
import { ToolSandbox } from "./sandbox.js";

export class Console {
  private sessionId = "";
  private snapshotId = "";
  private editor: ObjectiveEditor | null = null;
  private activeSandbox: ToolSandbox | null = null;

  constructor(
    private readonly root: HTMLElement,
    private readonly api: EngineApi,
  ) {}

  private el<T extends HTMLElement>(selector: string): T {
    const node = this.root.querySelector<T>(selector);
    if (!node) throw new Error(`console markup is missing ${selector}`);
    return node;
  }

  async start(): Promise<void> {
    const { session_id } = await this.api.createSession();
    this.sessionId = session_id;
    this.el("#session-id").textContent = session_id;
    this.editor = new ObjectiveEditor(
      this.el("#objectives"), this.api, this.sessionId,
    );

    this.el("#upload-form").addEventListener("submit", (event) => {
      event.preventDefault();
      void this.uploadContext();
    });
    this.el("#induce-button").addEventListener("click", () => void this.launch("induce"));
    this.el("#experts-button").addEventListener("click", () => void this.launch("experts"));
    this.el("#tools-button").addEventListener("click", () => void this.launch("tools"));
  }

  private async uploadContext(): Promise<void> {
    const text = this.el<HTMLTextAreaElement>("#context-text").value;
    const hint = this.el<HTMLInputElement>("#source-hint").value;
    const fileInput = this.el<HTMLInputElement>("#context-image");
    let image_b64: string | undefined;
    let image_media_type: string | undefined;
    const file = fileInput.files?.[0];
    if (file) {
      image_b64 = await fileToBase64(file);
      image_media_type = file.type || "image/png";
    }
    const { snapshot_id } = await this.api.createSnapshot({
      text: text || undefined,
      image_b64,
      image_media_type,
      source_hint: hint || undefined,
      session: this.sessionId,
    });
    this.snapshotId = snapshot_id;
    this.el("#snapshot-id").textContent = snapshot_id;
  }

  private async launch(kind: "induce" | "experts" | "tools"): Promise<void> {
    if (!this.snapshotId) {
      this.status(`upload context before starting a ${kind} job`);
      return;
    }
    const body: Parameters<EngineApi["startJob"]>[0] = {
      session: this.sessionId,
      kind,
      snapshot: this.snapshotId,
    };
    if (kind !== "induce") {
      const setId = this.el<HTMLInputElement>("#objective-set").value;
      const index = Number(this.el<HTMLInputElement>("#objective-index").value || "0");
      body.objective = { set: setId, index };
    }
    const { job_id } = await this.api.startJob(body);
    this.status(`${kind} job ${job_id} started`);
    const row = this.jobRow(job_id, kind);
    try {
      const job = await pollJob(this.api, job_id, {
        onUpdate: (update) => {
          row.querySelector(".job-state")!.textContent = update.state;
        },
      });
      await this.showResult(job);
    } catch (error) {
      this.status(error instanceof Error ? error.message : String(error));
    }
  }

  private jobRow(jobId: string, kind: string): HTMLElement {
    const row = document.createElement("li");
    row.className = "job-row";
    row.dataset.jobId = jobId;
    row.innerHTML = `<span class="job-kind"></span> <code>${jobId}</code> ` +
      `<span class="job-state">queued</span> <button class="job-audit">prompts</button>`;
    row.querySelector(".job-kind")!.textContent = kind;
    row.querySelector(".job-audit")!.addEventListener("click", () => {
      void loadAuditView(this.el("#audit"), this.api, jobId);
    });
    this.el("#jobs").appendChild(row);
    return row;
  }

  private async showResult(job: Job): Promise<void> {
    if (job.kind === "induce") {
      await this.editor?.refresh();
      const setId = (job.result as { set_id?: string })?.set_id ?? "";
      this.el<HTMLInputElement>("#objective-set").value = setId;
      return;
    }
    if (job.kind === "tools" && job.result) {
      this.activeSandbox?.dispose();
      const sandbox = new ToolSandbox(this.el("#sandbox"), job.job_id, this.api);
      sandbox.mount((job.result as unknown as ToolResult).code);
      this.activeSandbox = sandbox;
      return;
    }
    this.el("#result").textContent = JSON.stringify(job.result, null, 2);
  }

  private status(message: string): void {
    this.el("#status").textContent = message;
  }
}

function fileToBase64(file: File): Promise<string> {
  return new Promise((resolve, reject) => {
    const reader = new FileReader();
    reader.onerror = () => reject(reader.error);
    reader.onload = () => {
      const url = String(reader.result);
      resolve(url.slice(url.indexOf(",") + 1));
    };
    reader.readAsDataURL(file);
  });
}
