// Playground panel rendering: status chip, log pane, trace table, measures.

import type { RunRecordValue } from "./types.js";
import { escapeHtml } from "./trace.js";

export function renderStatusChip(record: RunRecordValue | null): string {
  if (!record) {
    return `<span class="chip idle">no run</span>`;
  }
  const cls = { QUEUED: "queued", RUNNING: "running", COMPLETED: "completed", FAILED: "failed" }[record.status];
  let text: string = record.status;
  if (record.status === "FAILED" && record.failure) {
    const where = record.failure.node_id ? ` @ ${record.failure.node_id}` : "";
    text = `FAILED: ${record.failure.code}${where}`;
  }
  return `<span class="chip ${cls}">${escapeHtml(text)}</span>`;
}

export function renderLogPane(logText: string): string {
  return `<pre class="log">${escapeHtml(logText)}</pre>`;
}

export function renderRunControls(busy: boolean): string {
  return (
    `<div class="run-controls">` +
    `<label>seed <input type="number" id="seed-input" value="42" step="1" min="0"></label>` +
    `<label>repetitions <input type="number" id="reps-input" value="1" step="1" min="1"></label>` +
    `<button id="run-button" ${busy ? "disabled" : ""}>run in playground</button>` +
    `<button id="export-button" ${busy ? "disabled" : ""}>export bundle</button>` +
    `<span id="bundle-hash" class="hash"></span>` +
    `</div>`
  );
}
