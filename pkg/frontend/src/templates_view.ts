// Template browser rendering: list of names/versions plus one detail card.

import type { TemplateListEntry, TemplateValue } from "./types.js";
import { escapeHtml } from "./trace.js";

export function renderTemplateList(entries: TemplateListEntry[], selected: string | null): string {
  if (entries.length === 0) {
    return `<p><em>no templates published</em></p>`;
  }
  const rows = entries
    .map((entry) => {
      const versions = entry.versions
        .map((v) => `<button data-template="${entry.name}" data-version="${v}">v${v}${v === entry.active ? " (active)" : ""}</button>`)
        .join(" ");
      const cls = entry.name === selected ? "template-row selected" : "template-row";
      return `<div class="${cls}"><strong>${escapeHtml(entry.name)}</strong> ${versions}</div>`;
    })
    .join("");
  return `<div class="template-list">${rows}</div>`;
}

export function renderTemplateDetail(template: TemplateValue | null): string {
  if (!template) {
    return `<div class="template-detail"><em>select a template version</em></div>`;
  }
  const datasets = Object.entries(template.dataset)
    .map(
      ([kind, file]) =>
        `<tr><td>${kind}</td><td><code>${escapeHtml(file.path)}</code></td>` +
        `<td><code class="hash">${file.sha256.slice(0, 12)}…</code></td></tr>`,
    )
    .join("");
  return (
    `<div class="template-detail">` +
    `<h3>${escapeHtml(template.name)} v${template.version} <span class="tag">${template.status}</span></h3>` +
    `<p>engine pin: <code>${escapeHtml(template.engine_version)}</code>, backend: <code>${escapeHtml(
      template.backend.type,
    )}</code>, baselines: ${template.baselines.length}</p>` +
    `<table class="datasets"><thead><tr><th>kind</th><th>path</th><th>sha256</th></tr></thead>` +
    `<tbody>${datasets}</tbody></table>` +
    `<button data-use-template="${escapeHtml(template.name)}" data-use-version="${template.version}">` +
    `use in composer</button>` +
    `</div>`
  );
}
