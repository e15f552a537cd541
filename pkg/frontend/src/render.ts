/** DOM construction for the review page.
 *
 * Every call rebuilds the page from the latest endpoint documents. Entry
 * content is the author's own plaintext and may contain anything, so nodes
 * are built with textContent throughout; no string ever reaches innerHTML.
 */

import type { PreviewDoc, PreviewSlot, ReportDoc, ReportEntry } from "./api.js";

export interface AppState {
  report: ReportDoc | null;
  preview: PreviewDoc | null;
  sharedPath: string | null;
  warnings: string[];
  error: string | null;
  busy: boolean;
}

export interface Actions {
  toggle(entryId: number, toPublic: boolean): void;
  confirm(): void;
}

const KIND_LABELS: Record<string, string> = {
  "query-string": "query text",
  "parameter-value": "parameter value",
  "snapshot-text": "snapshot text",
  "condition-literal": "condition value",
};

export const HIDDEN_PLACEHOLDER = "hidden text";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function kindLabel(kind: string): string {
  return KIND_LABELS[kind] ?? kind;
}

function slotTitle(slot: PreviewSlot): string {
  const label = kindLabel(slot.kind);
  const fate = slot.state === "public"
    ? "Shared as plain text. Click to hide it."
    : "Hidden in the shared file. Click to share it as plain text.";
  const mark = slot.overridden ? " Overridden by you." : "";
  return `${label}. ${fate}${mark}`;
}

function slotChip(slot: PreviewSlot, frozen: boolean, actions: Actions): HTMLButtonElement {
  const chip = el("button", `slot ${slot.state}`);
  chip.type = "button";
  chip.dataset.entry = String(slot.entry_id);
  chip.textContent = slot.state === "public" ? slot.content : HIDDEN_PLACEHOLDER;
  chip.title = slotTitle(slot);
  if (slot.overridden) chip.classList.add("overridden");
  chip.disabled = frozen;
  chip.addEventListener("click", () => {
    actions.toggle(slot.entry_id, slot.state !== "public");
  });
  return chip;
}

function stepItem(kind: string, text: string, slots: PreviewSlot[],
                  frozen: boolean, actions: Actions): HTMLLIElement {
  const item = el("li", "step");
  const head = el("div", "step-head");
  head.append(el("span", "step-kind", kind), el("span", "step-text", text));
  item.append(head);
  if (slots.length) {
    const row = el("div", "slots");
    for (const slot of slots) row.append(slotChip(slot, frozen, actions));
    item.append(row);
  }
  return item;
}

function previewSection(preview: PreviewDoc, frozen: boolean, actions: Actions): HTMLElement {
  const section = el("section", "preview");
  section.id = "preview";
  section.append(el("h2", undefined, "Script preview"));
  const params = preview.parameters.length
    ? preview.parameters.join(", ")
    : "none";
  section.append(el("p", "parameters", `Parameters: ${params}`));
  const list = el("ol", "steps");
  for (const step of preview.steps) {
    list.append(stepItem(step.kind, step.text, step.slots, frozen, actions));
  }
  section.append(list);
  return section;
}

function formatP(p: number): string {
  if (p === 0) return "0";
  return p < 0.001 ? p.toExponential(2) : String(Number(p.toPrecision(3)));
}

function entryRow(entry: ReportEntry, frozen: boolean, actions: Actions): HTMLTableRowElement {
  const row = el("tr");
  row.dataset.entry = String(entry.entry_id);
  row.append(el("td", "content", entry.content));
  row.append(el("td", "num", `${entry.f} of ${entry.g}`));
  row.append(el("td", "num", formatP(entry.p_value)));
  row.append(el("td", undefined, entry.public ? "public" : "personal"));

  const state = el("td", entry.final_public ? "state public" : "state personal",
                   entry.final_public ? "plain text" : "hidden");
  if (entry.override !== null) {
    state.append(" ");
    state.append(el("span", "override-mark", "(overridden)"));
  }
  row.append(state);

  const action = el("td");
  const button = el("button", "toggle",
                    entry.final_public ? "Hide" : "Share as text");
  button.type = "button";
  button.disabled = frozen;
  button.addEventListener("click", () => {
    actions.toggle(entry.entry_id, !entry.final_public);
  });
  action.append(button);
  row.append(action);
  return row;
}

function entriesSection(report: ReportDoc, frozen: boolean, actions: Actions): HTMLElement {
  const section = el("section", "entries");
  section.id = "entries";
  section.append(el("h2", undefined, "Detected values"));
  if (!report.entries.length) {
    section.append(el("p", undefined, "No text values detected."));
    return section;
  }
  const table = el("table");
  const head = el("tr");
  for (const name of ["value", "seen", "p", "verdict", "shared as", ""]) {
    head.append(el("th", undefined, name));
  }
  const thead = el("thead");
  thead.append(head);
  const tbody = el("tbody");
  for (const entry of report.entries) {
    tbody.append(entryRow(entry, frozen, actions));
  }
  table.append(thead, tbody);
  const scroll = el("div", "table-scroll");
  scroll.append(table);
  section.append(scroll);
  return section;
}

function statusArea(state: AppState): HTMLElement {
  const area = el("div", "status");
  area.id = "status";
  if (state.error) {
    area.append(el("p", "error", state.error));
  }
  if (state.sharedPath) {
    area.append(el("p", "shared", `Shared script written to ${state.sharedPath}`));
    for (const warning of state.warnings) {
      area.append(el("p", "warning", warning));
    }
  }
  return area;
}

export function render(root: HTMLElement, state: AppState, actions: Actions): void {
  const { report, preview } = state;
  if (!report || !preview) {
    root.replaceChildren(el("p", "loading", "Loading the review session..."));
    return;
  }
  const frozen = report.confirmed || state.busy;

  const header = el("header");
  header.append(el("h1", undefined, "Review before sharing"));
  const scriptLine = el("p", "script-line");
  scriptLine.append("Script ", el("strong", undefined, report.script),
                    ` will be written to ${report.out_path}`);
  header.append(scriptLine);
  header.append(el("p", "counts",
                   `${report.counts.public} shared as text, `
                   + `${report.counts.personal} hidden`));

  const confirm = el("button", "confirm",
                     report.confirmed ? "Already shared" : "Confirm and share");
  confirm.type = "button";
  confirm.id = "confirm";
  confirm.disabled = report.confirmed || state.busy;
  confirm.addEventListener("click", () => actions.confirm());
  header.append(confirm);

  root.replaceChildren(header, statusArea(state),
                       previewSection(preview, frozen, actions),
                       entriesSection(report, frozen, actions));
}
