// Trace and measures view models: pure functions from API payloads to
// renderable rows, kept DOM-free so the playground's fidelity is testable.

import type { MeasuresValue, TraceEventValue } from "./types.js";

export interface TraceRow {
  seq: number;
  simTime: number;
  action: string;
  detail: string;
}

export function parseTraceLines(text: string): TraceEventValue[] {
  return text
    .split("\n")
    .map((line) => line.trim())
    .filter((line) => line.length > 0)
    .map((line) => JSON.parse(line) as TraceEventValue);
}

function describePayload(event: TraceEventValue): string {
  const payload = event.payload;
  switch (event.action) {
    case "QUERY_ISSUED":
      return `query "${payload["query"]}"`;
    case "SNIPPET_EXAMINED":
    case "DOC_CLICKED":
    case "DOC_MARKED_RELEVANT":
      return `rank ${payload["rank"]}, doc ${payload["doc_id"]}`;
    case "DOC_JUDGED":
      return `rank ${payload["rank"]}, doc ${payload["doc_id"]}, relevant=${payload["relevant"]}`;
    case "SESSION_END":
      return `reason ${payload["reason"]}`;
    default:
      return JSON.stringify(payload);
  }
}

/** One table row per trace record; this count mirrors the API stream. */
export function traceRows(events: TraceEventValue[]): TraceRow[] {
  return events.map((event) => ({
    seq: event.seq,
    simTime: event.sim_time,
    action: event.action,
    detail: describePayload(event),
  }));
}

export function renderTraceTable(rows: TraceRow[]): string {
  const body = rows
    .map(
      (row) =>
        `<tr><td>${row.seq}</td><td>${row.simTime.toFixed(1)}s</td>` +
        `<td><code>${row.action}</code></td><td>${escapeHtml(row.detail)}</td></tr>`,
    )
    .join("");
  return (
    `<table class="trace"><thead><tr><th>#</th><th>sim time</th><th>action</th><th>detail</th></tr></thead>` +
    `<tbody>${body}</tbody></table>`
  );
}

export interface MeasureRow {
  key: string;
  mean: number;
}

export function measureRows(measures: MeasuresValue): MeasureRow[] {
  return Object.keys(measures.mean)
    .sort()
    .map((key) => ({ key, mean: measures.mean[key] }));
}

export function renderMeasures(measures: MeasuresValue): string {
  const rows = measureRows(measures)
    .map((row) => `<tr><td>${escapeHtml(row.key)}</td><td>${formatNumber(row.mean)}</td></tr>`)
    .join("");
  return `<table class="measures"><thead><tr><th>measure</th><th>mean</th></tr></thead><tbody>${rows}</tbody></table>`;
}

export function formatNumber(value: number): string {
  return Number.isInteger(value) ? String(value) : value.toFixed(4);
}

export function escapeHtml(text: string): string {
  return text
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");
}
