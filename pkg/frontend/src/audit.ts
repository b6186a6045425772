/**
 * Prompt audit view: the provider calls a job made, prompts included, so an
 * operator can verify exactly what an edited objective did downstream.
 */

import type { CallRecord, EngineApi } from "./api.js";

export function renderAuditView(container: HTMLElement, calls: CallRecord[]): void {
  container.textContent = "";
  const list = document.createElement("ol");
  list.className = "audit-calls";
  for (const call of calls) {
    const item = document.createElement("li");
    item.className = "audit-call";
    const heading = document.createElement("div");
    heading.className = "audit-call-role";
    heading.textContent = `${call.role} (attempt ${call.attempt})`;
    const prompt = document.createElement("pre");
    prompt.className = "audit-call-prompt";
    prompt.textContent = call.prompt;
    item.append(heading, prompt);
    list.appendChild(item);
  }
  container.appendChild(list);
}

export async function loadAuditView(
  container: HTMLElement,
  api: EngineApi,
  jobId: string,
): Promise<CallRecord[]> {
  const { calls } = await api.getJobCalls(jobId);
  renderAuditView(container, calls);
  return calls;
}

export const auditContains = (calls: CallRecord[], needle: string): boolean =>
  calls.some((call) => call.prompt.includes(needle));
