import { beforeEach, describe, expect, it } from "vitest";

import { EngineApi } from "../src/api";
import {
  HelperBridge,
  InspectorEntry,
  SANDBOX_CSP,
  ToolSandbox,
  buildSandboxHtml,
  helperBootstrapSource,
} from "../src/sandbox";
import { EngineStub } from "./engine-stub";

const GOLDEN_TOOL = `<div id="tool-root" class="panel">
  <button id="ask" class="action">Ask the expert</button>
  <div id="out" class="output"></div>
</div>`;

function hooksRecorder() {
  const record = {
    loading: [] as boolean[],
    logs: [] as InspectorEntry[],
    errors: [] as string[],
    posted: [] as unknown[],
  };
  return {
    record,
    hooks: {
      setLoading: (active: boolean) => record.loading.push(active),
      log: (entry: InspectorEntry) => record.logs.push(entry),
      error: (message: string) => record.errors.push(message),
      post: (message: unknown) => record.posted.push(message),
    },
  };
}

describe("sandbox document", () => {
  it("carries a network-denying CSP and the helper bootstrap", () => {
    const html = buildSandboxHtml(GOLDEN_TOOL);
    expect(html).toContain(`content="${SANDBOX_CSP}"`);
    expect(SANDBOX_CSP).toContain("default-src 'none'");
    expect(html).toContain("window.promptExpert");
    expect(html).toContain(GOLDEN_TOOL);
  });

  it("bootstrap exposes the full helper contract and blocks network APIs", () => {
    const source = helperBootstrapSource();
    const posted: unknown[] = [];
    const listeners: ((event: unknown) => void)[] = [];
    const fakeWindow: Record<string, unknown> = {
      parent: { postMessage: (message: unknown) => posted.push(message) },
      addEventListener: (_type: string, fn: (event: unknown) => void) => listeners.push(fn),
    };
    new Function("window", source)(fakeWindow);

    expect(typeof fakeWindow.getExperts).toBe("function");
    expect(typeof fakeWindow.promptExpert).toBe("function");
    expect(fakeWindow.promptEntity).toBe(fakeWindow.promptExpert);
    expect(typeof fakeWindow.promptGeneral).toBe("function");
    expect(posted).toContainEqual({ type: "sandbox-ready" });

    // Direct fetch is shadowed: it reports itself and throws.
    expect(() => (fakeWindow.fetch as () => void)()).toThrow(/disabled/);
    expect(posted).toContainEqual({ type: "blocked-network", api: "fetch" });

    // A helper call posts a bridge message and resolves on the reply.
    const promise = (fakeWindow.promptExpert as (id: string, p: string) => Promise<string>)("0", "hi");
    const call = posted.find(
      (m) => (m as { type?: string }).type === "helper-call",
    ) as { callId: string };
    expect(call).toBeDefined();
    listeners.forEach((fn) =>
      fn({ data: { type: "helper-result", callId: call.callId, result: "reply" } }),
    );
    return expect(promise).resolves.toBe("reply");
  });
});

describe("HelperBridge", () => {
  let stub: EngineStub;
  let api: EngineApi;

  beforeEach(async () => {
    stub = new EngineStub();
    api = new EngineApi("", stub.fetch);
    // A run must exist for the helper endpoint to accept calls.
    await api.startJob({ session: stub.sessionId, kind: "tools", snapshot: stub.snapshotId });
  });

  it("bridges promptExpert with a visible loading state and inspector entry", async () => {
    stub.helperDelayMs = 5;
    const { record, hooks } = hooksRecorder();
    const bridge = new HelperBridge("job-0", api, hooks);
    const pending = bridge.handleMessage({
      type: "helper-call", callId: "c1", name: "promptExpert", args: ["0", "review this"],
    });
    expect(record.loading[0]).toBe(true); // loading shown while in flight
    await pending;
    expect(record.loading.at(-1)).toBe(false);
    expect(stub.helperLog).toEqual([{ name: "promptExpert", args: ["0", "review this"] }]);
    expect(record.posted).toContainEqual({
      type: "helper-result", callId: "c1", result: "expert reply to: review this",
    });
    expect(bridge.entries).toHaveLength(1);
    expect(bridge.entries[0]).toMatchObject({ name: "promptExpert", status: "ok" });
  });

  it("logs blocked direct network attempts", async () => {
    const { record, hooks } = hooksRecorder();
    const bridge = new HelperBridge("job-0", api, hooks);
    await bridge.handleMessage({ type: "blocked-network", api: "fetch" });
    expect(bridge.entries[0]).toMatchObject({ kind: "blocked", name: "fetch", status: "blocked" });
    expect(record.logs).toHaveLength(1);
  });

  it("rejects helpers outside the contract without touching the engine", async () => {
    const { record, hooks } = hooksRecorder();
    const bridge = new HelperBridge("job-0", api, hooks);
    await bridge.handleMessage({
      type: "helper-call", callId: "c9", name: "stealData", args: [],
    });
    expect(stub.helperLog).toHaveLength(0);
    expect(record.posted).toContainEqual(
      expect.objectContaining({ type: "helper-error", callId: "c9" }),
    );
  });

  it("surfaces bridge failures as an error banner, tool stays mounted", async () => {
    const { record, hooks } = hooksRecorder();
    const bridge = new HelperBridge("missing-run", api, hooks);
    await bridge.handleMessage({
      type: "helper-call", callId: "c2", name: "promptGeneral", args: ["q"],
    });
    expect(record.errors).toHaveLength(1);
    expect(record.posted).toContainEqual(
      expect.objectContaining({ type: "helper-error", callId: "c2" }),
    );
  });
});

describe("ToolSandbox DOM chrome", () => {
  it("mounts a scripts-only sandboxed iframe with the CSP document", async () => {
    const stub = new EngineStub();
    const api = new EngineApi("", stub.fetch);
    await api.startJob({ session: stub.sessionId, kind: "tools", snapshot: stub.snapshotId });

    const container = document.createElement("div");
    document.body.appendChild(container);
    const sandbox = new ToolSandbox(container, "job-0", api);
    const frame = sandbox.mount(GOLDEN_TOOL);

    expect(frame.getAttribute("sandbox")).toBe("allow-scripts");
    expect(frame.getAttribute("srcdoc")).toContain(SANDBOX_CSP);
    expect(frame.getAttribute("srcdoc")).toContain(GOLDEN_TOOL);
    expect(sandbox.loadingBadge.hidden).toBe(true);
    expect(sandbox.banner.hidden).toBe(true);

    // Drive the bridge as the frame would; the chrome reacts.
    stub.helperDelayMs = 5;
    const call = sandbox.bridge.handleMessage({
      type: "helper-call", callId: "c1", name: "promptExpert", args: ["0", "hello"],
    });
    expect(sandbox.loadingBadge.hidden).toBe(false);
    expect(sandbox.loadingBadge.textContent).toContain("promptExpert");
    await call;
    expect(sandbox.loadingBadge.hidden).toBe(true);
    expect(sandbox.inspector.textContent).toContain("promptExpert");

    await sandbox.bridge.handleMessage({ type: "blocked-network", api: "fetch" });
    expect(sandbox.inspector.textContent).toContain("blocked: fetch");

    sandbox.dispose();
    expect(container.textContent).toBe("");
  });
});
