/**
 * Inline objective editor.
 *
 * Name/description text edits plus a 1-10 weight stepper. Client-side
 * validation mirrors the engine's objective invariants so obviously bad
 * edits never leave the browser; a 409 from the server (a consuming job is
 * running) surfaces as an inline notice rather than a lost edit.
 */

import { ApiError, EngineApi, ObjectiveFields, ObjectiveSetView } from "./api.js";

export const WEIGHT_MIN = 1;
export const WEIGHT_MAX = 10;
export const NAME_MAX = 120;
export const DESCRIPTION_MAX = 600;

export function validateObjective(fields: ObjectiveFields): string[] {
  const problems: string[] = [];
  if (!fields.name.trim()) problems.push("name is empty");
  if (fields.name.length > NAME_MAX) problems.push(`name exceeds ${NAME_MAX} characters`);
  if (!fields.description.trim()) problems.push("description is empty");
  if (fields.description.length > DESCRIPTION_MAX) {
    problems.push(`description exceeds ${DESCRIPTION_MAX} characters`);
  }
  if (!Number.isInteger(fields.weight) || fields.weight < WEIGHT_MIN || fields.weight > WEIGHT_MAX) {
    problems.push(`weight must be an integer in ${WEIGHT_MIN}-${WEIGHT_MAX}`);
  }
  return problems;
}

export const clampWeight = (value: number): number =>
  Math.min(WEIGHT_MAX, Math.max(WEIGHT_MIN, Math.round(value)));

interface EditorHooks {
  onSaved?: (setId: string, index: number, objective: ObjectiveFields) => void;
}

export class ObjectiveEditor {
  constructor(
    private readonly container: HTMLElement,
    private readonly api: EngineApi,
    private readonly sessionId: string,
    private readonly hooks: EditorHooks = {},
  ) {}

  async refresh(): Promise<void> {
    const { sets } = await this.api.listObjectives(this.sessionId);
    this.container.textContent = "";
    for (const set of sets) {
      this.container.appendChild(this.renderSet(set));
    }
  }

  private renderSet(set: ObjectiveSetView): HTMLElement {
    const root = document.createElement("section");
    root.className = "objective-set";
    root.dataset.setId = set.set_id;

    // Reasoning trace is read-only context; collapsed by default.
    const trace = document.createElement("details");
    trace.className = "reasoning-trace";
    const summary = document.createElement("summary");
    summary.textContent = "Reasoning trace";
    const body = document.createElement("pre");
    body.textContent = set.reasoning;
    trace.append(summary, body);
    root.appendChild(trace);

    set.objectives.forEach((entry) => {
      root.appendChild(this.renderRow(set.set_id, entry.index, entry.objective, entry.edited));
    });
    return root;
  }

  private renderRow(
    setId: string,
    index: number,
    objective: ObjectiveFields,
    edited: boolean,
  ): HTMLElement {
    const row = document.createElement("div");
    row.className = "objective-row" + (edited ? " edited" : "");
    row.dataset.index = String(index);

    const name = document.createElement("input");
    name.className = "objective-name";
    name.value = objective.name;
    name.maxLength = NAME_MAX;

    const description = document.createElement("textarea");
    description.className = "objective-description";
    description.value = objective.description;
    description.maxLength = DESCRIPTION_MAX;

    const weightBox = document.createElement("div");
    weightBox.className = "weight-stepper";
    const decrement = document.createElement("button");
    decrement.className = "weight-down";
    decrement.textContent = "−";
    const weightValue = document.createElement("output");
    weightValue.className = "weight-value";
    weightValue.value = String(objective.weight);
    const increment = document.createElement("button");
    increment.className = "weight-up";
    increment.textContent = "+";
    weightBox.append(decrement, weightValue, increment);

    const save = document.createElement("button");
    save.className = "objective-save";
    save.textContent = "Save";

    const notice = document.createElement("span");
    notice.className = "objective-notice";
    notice.hidden = true;

    const currentWeight = () => Number(weightValue.value);
    const setWeight = (value: number) => {
      weightValue.value = String(clampWeight(value));
      syncControls();
    };
    const currentFields = (): ObjectiveFields => ({
      name: name.value,
      description: description.value,
      weight: currentWeight(),
    });
    const syncControls = () => {
      // At the bounds the stepper simply cannot move further.
      increment.disabled = currentWeight() >= WEIGHT_MAX;
      decrement.disabled = currentWeight() <= WEIGHT_MIN;
      save.disabled = validateObjective(currentFields()).length > 0;
    };

    increment.addEventListener("click", () => setWeight(currentWeight() + 1));
    decrement.addEventListener("click", () => setWeight(currentWeight() - 1));
    name.addEventListener("input", syncControls);
    description.addEventListener("input", syncControls);

    save.addEventListener("click", async () => {
      notice.hidden = true;
      const fields = currentFields();
      const problems = validateObjective(fields);
      if (problems.length) {
        notice.textContent = problems.join("; ");
        notice.hidden = false;
        return;
      }
      save.disabled = true;
      try {
        await this.api.editObjective(this.sessionId, setId, index, fields);
        row.classList.add("edited");
        this.hooks.onSaved?.(setId, index, fields);
      } catch (error) {
        if (error instanceof ApiError && error.status === 409) {
          notice.textContent = "A job using this objective is running; try again when it finishes.";
        } else {
          notice.textContent = error instanceof Error ? error.message : String(error);
        }
        notice.hidden = false;
      } finally {
        save.disabled = false;
        syncControls();
      }
    });

    syncControls();
    row.append(name, description, weightBox, save, notice);
    return row;
  }
}
