import { beforeEach, describe, expect, it } from "vitest";

import { EngineApi } from "../src/api";
import {
  ObjectiveEditor,
  clampWeight,
  validateObjective,
} from "../src/objectives";
import { EngineStub } from "./engine-stub";

const flush = () => new Promise((resolve) => setTimeout(resolve, 0));

describe("objective validation mirror", () => {
  it("accepts the valid range and rejects violations", () => {
    expect(validateObjective({ name: "n", description: "d", weight: 5 })).toEqual([]);
    expect(validateObjective({ name: "", description: "d", weight: 5 })).not.toEqual([]);
    expect(validateObjective({ name: "n", description: "", weight: 5 })).not.toEqual([]);
    expect(validateObjective({ name: "n", description: "d", weight: 0 })).not.toEqual([]);
    expect(validateObjective({ name: "n", description: "d", weight: 11 })).not.toEqual([]);
    expect(validateObjective({ name: "n", description: "d", weight: 5.5 })).not.toEqual([]);
    expect(validateObjective({ name: "n".repeat(121), description: "d", weight: 5 })).not.toEqual([]);
    expect(validateObjective({ name: "n", description: "d".repeat(601), weight: 5 })).not.toEqual([]);
  });

  it("clamps stepper weights to 1..10", () => {
    expect(clampWeight(0)).toBe(1);
    expect(clampWeight(11)).toBe(10);
    expect(clampWeight(7)).toBe(7);
  });
});

describe("ObjectiveEditor", () => {
  let stub: EngineStub;
  let api: EngineApi;
  let container: HTMLElement;
  let editor: ObjectiveEditor;

  beforeEach(async () => {
    stub = new EngineStub();
    api = new EngineApi("", stub.fetch);
    container = document.createElement("div");
    document.body.appendChild(container);
    editor = new ObjectiveEditor(container, api, stub.sessionId);
    await editor.refresh();
  });

  const row = (index: number) =>
    container.querySelectorAll<HTMLElement>(".objective-row")[index];

  it("renders every objective with a collapsed reasoning trace", () => {
    expect(container.querySelectorAll(".objective-row")).toHaveLength(2);
    const trace = container.querySelector<HTMLDetailsElement>(".reasoning-trace")!;
    expect(trace.open).toBe(false);
    expect(trace.textContent).toContain("stub reasoning trace");
  });

  it("weight stepper cannot increment past 10", async () => {
    const first = row(0);
    const up = first.querySelector<HTMLButtonElement>(".weight-up")!;
    const value = first.querySelector<HTMLOutputElement>(".weight-value")!;
    expect(value.value).toBe("9");
    up.click();
    expect(value.value).toBe("10");
    expect(up.disabled).toBe(true);
    up.click();
    expect(value.value).toBe("10");
  });

  it("weight stepper cannot decrement past 1", () => {
    const first = row(0);
    const down = first.querySelector<HTMLButtonElement>(".weight-down")!;
    const value = first.querySelector<HTMLOutputElement>(".weight-value")!;
    for (let i = 0; i < 20; i += 1) down.click();
    expect(value.value).toBe("1");
    expect(down.disabled).toBe(true);
  });

  it("save issues a PATCH and marks the row edited", async () => {
    const second = row(1);
    second.querySelector<HTMLButtonElement>(".weight-up")!.click();
    second.querySelector<HTMLButtonElement>(".weight-up")!.click();
    second.querySelector<HTMLButtonElement>(".objective-save")!.click();
    await flush();
    expect(stub.overrides.get("stub-set:1")?.objective.weight).toBe(10);
    expect(second.classList.contains("edited")).toBe(true);
  });

  it("empty name disables save locally", () => {
    const first = row(0);
    const name = first.querySelector<HTMLInputElement>(".objective-name")!;
    name.value = "   ";
    name.dispatchEvent(new Event("input"));
    expect(first.querySelector<HTMLButtonElement>(".objective-save")!.disabled).toBe(true);
  });

  it("server 409 surfaces as an inline job-running notice", async () => {
    stub.consumingJobRunning = true;
    const first = row(0);
    first.querySelector<HTMLButtonElement>(".weight-down")!.click();
    first.querySelector<HTMLButtonElement>(".objective-save")!.click();
    await flush();
    const notice = first.querySelector<HTMLElement>(".objective-notice")!;
    expect(notice.hidden).toBe(false);
    expect(notice.textContent).toContain("running");
    expect(stub.overrides.size).toBe(0);
  });
});
