/**
 * Sandboxed execution of generated tools.
 *
 * The tool runs in an iframe with scripts-only sandboxing and a CSP that
 * denies all network access. The only way out is a postMessage bridge that
 * implements the helper contract (getExperts, promptExpert/promptEntity,
 * promptGeneral) against the engine's /runs/{id}/helpers/{name} endpoint.
 * Every bridged call is logged to an inspector panel, helper latency shows
 * as an explicit loading state, and bridge failures surface as a banner
 * while the tool stays mounted.
 */

import type { EngineApi } from "./api.js";

export const HELPER_NAMES = [
  "getExperts",
  "promptExpert",
  "promptEntity",
  "promptGeneral",
] as const;

export const SANDBOX_CSP =
  "default-src 'none'; script-src 'unsafe-inline'; style-src 'unsafe-inline'; img-src data:";

export const SANDBOX_IFRAME_FLAGS = "allow-scripts";

/** Script injected ahead of the tool code inside the frame. */
export function helperBootstrapSource(): string {
  return `
(function () {
  "use strict";
  var pending = {};
  var nextId = 1;

  function callHelper(name, args) {
    return new Promise(function (resolve, reject) {
      var callId = "c" + nextId++;
      pending[callId] = { resolve: resolve, reject: reject };
      window.parent.postMessage(
        { type: "helper-call", callId: callId, name: name, args: args }, "*");
    });
  }

  window.getExperts = function () {
    return callHelper("getExperts", []).then(function (text) {
      return JSON.parse(text);
    });
  };
  window.promptExpert = function (expertId, prompt) {
    return callHelper("promptExpert", [expertId, prompt]);
  };
  window.promptEntity = window.promptExpert;
  window.promptGeneral = function (prompt) {
    return callHelper("promptGeneral", [prompt]);
  };

  window.addEventListener("message", function (event) {
    var data = event.data || {};
    var entry = pending[data.callId];
    if (!entry) { return; }
    delete pending[data.callId];
    if (data.type === "helper-result") { entry.resolve(data.result); }
    else if (data.type === "helper-error") { entry.reject(new Error(data.message)); }
  });

  function blocked(name) {
    return function () {
      window.parent.postMessage(
        { type: "blocked-network", api: name }, "*");
      throw new Error(name + " is disabled inside the tool sandbox");
    };
  }
  // CSP already denies the network; shadowing the entry points as well makes
  // the failure loud and logged instead of a silent CSP violation.
  try { window.fetch = blocked("fetch"); } catch (e) {}
  try { window.XMLHttpRequest = blocked("XMLHttpRequest"); } catch (e) {}
  try { window.WebSocket = blocked("WebSocket"); } catch (e) {}
  try { window.EventSource = blocked("EventSource"); } catch (e) {}

  window.parent.postMessage({ type: "sandbox-ready" }, "*");
})();
`;
}

export function buildSandboxHtml(toolCode: string): string {
  return [
    "<!doctype html>",
    "<html>",
    "<head>",
    `<meta http-equiv="Content-Security-Policy" content="${SANDBOX_CSP}">`,
    "<meta charset=\"utf-8\">",
    `<script>${helperBootstrapSource()}</script>`,
    "</head>",
    "<body>",
    toolCode,
    "</body>",
    "</html>",
  ].join("\n");
}

export interface InspectorEntry {
  kind: "helper" | "blocked";
  name: string;
  args?: unknown[];
  status: "ok" | "error" | "blocked";
  detail?: string;
}

export interface BridgeHooks {
  setLoading(active: boolean, name?: string): void;
  log(entry: InspectorEntry): void;
  error(message: string): void;
  post(message: unknown): void;
}

/** Host side of the helper contract; pure logic, no DOM. */
export class HelperBridge {
  readonly entries: InspectorEntry[] = [];
  private inFlight = 0;

  constructor(
    private readonly runId: string,
    private readonly api: EngineApi,
    private readonly hooks: BridgeHooks,
  ) {}

  async handleMessage(data: unknown): Promise<void> {
    if (typeof data !== "object" || data === null) return;
    const message = data as Record<string, unknown>;
    if (message.type === "helper-call") {
      await this.handleHelperCall(message);
    } else if (message.type === "blocked-network") {
      const entry: InspectorEntry = {
        kind: "blocked",
        name: String(message.api ?? "unknown"),
        status: "blocked",
        detail: "direct network access blocked inside the sandbox",
      };
      this.entries.push(entry);
      this.hooks.log(entry);
    }
    // Anything else (including sandbox-ready) is not actionable here.
  }

  private async handleHelperCall(message: Record<string, unknown>): Promise<void> {
    const callId = String(message.callId ?? "");
    const name = String(message.name ?? "");
    const args = Array.isArray(message.args) ? message.args : [];
    if (!(HELPER_NAMES as readonly string[]).includes(name)) {
      const entry: InspectorEntry = {
        kind: "helper", name, args, status: "error",
        detail: "not part of the helper contract",
      };
      this.entries.push(entry);
      this.hooks.log(entry);
      this.hooks.post({ type: "helper-error", callId, message: `unknown helper ${name}` });
      return;
    }
    this.inFlight += 1;
    this.hooks.setLoading(true, name);
    try {
      const { result } = await this.api.helperCall(this.runId, name, args);
      const entry: InspectorEntry = { kind: "helper", name, args, status: "ok" };
      this.entries.push(entry);
      this.hooks.log(entry);
      this.hooks.post({ type: "helper-result", callId, result });
    } catch (error) {
      const detail = error instanceof Error ? error.message : String(error);
      const entry: InspectorEntry = { kind: "helper", name, args, status: "error", detail };
      this.entries.push(entry);
      this.hooks.log(entry);
      this.hooks.error(`helper ${name} failed: ${detail}`);
      this.hooks.post({ type: "helper-error", callId, message: detail });
    } finally {
      this.inFlight -= 1;
      if (this.inFlight === 0) this.hooks.setLoading(false);
    }
  }
}

/** DOM chrome around a sandboxed tool: banner, loading badge, inspector. */
export class ToolSandbox {
  readonly bridge: HelperBridge;
  private frame: HTMLIFrameElement | null = null;
  private listener: ((event: MessageEvent) => void) | null = null;

  readonly banner: HTMLElement;
  readonly loadingBadge: HTMLElement;
  readonly inspector: HTMLElement;

  constructor(
    private readonly container: HTMLElement,
    runId: string,
    api: EngineApi,
  ) {
    this.banner = document.createElement("div");
    this.banner.className = "sandbox-error-banner";
    this.banner.hidden = true;

    this.loadingBadge = document.createElement("div");
    this.loadingBadge.className = "sandbox-loading";
    this.loadingBadge.hidden = true;

    this.inspector = document.createElement("ul");
    this.inspector.className = "sandbox-inspector";

    this.bridge = new HelperBridge(runId, api, {
      setLoading: (active, name) => {
        this.loadingBadge.hidden = !active;
        if (active && name) this.loadingBadge.textContent = `Calling ${name}…`;
      },
      log: (entry) => {
        const item = document.createElement("li");
        item.className = `inspector-${entry.status}`;
        item.textContent =
          entry.kind === "blocked"
            ? `blocked: ${entry.name} (${entry.detail ?? ""})`
            : `${entry.name}(${JSON.stringify(entry.args ?? [])}) -> ${entry.status}`;
        this.inspector.appendChild(item);
      },
      error: (message) => {
        this.banner.textContent = message;
        this.banner.hidden = false;
        // The tool stays mounted; the banner is chrome, not frame content.
      },
      post: (message) => {
        this.frame?.contentWindow?.postMessage(message, "*");
      },
    });
  }

  mount(toolCode: string): HTMLIFrameElement {
    const frame = document.createElement("iframe");
    frame.className = "sandbox-frame";
    frame.setAttribute("sandbox", SANDBOX_IFRAME_FLAGS);
    frame.setAttribute("srcdoc", buildSandboxHtml(toolCode));
    this.frame = frame;
    this.listener = (event: MessageEvent) => {
      if (event.source !== frame.contentWindow) return;
      void this.bridge.handleMessage(event.data);
    };
    window.addEventListener("message", this.listener);
    this.container.append(this.banner, this.loadingBadge, frame, this.inspector);
    return frame;
  }

  dispose(): void {
    if (this.listener) window.removeEventListener("message", this.listener);
    this.listener = null;
    this.container.textContent = "";
  }
}
