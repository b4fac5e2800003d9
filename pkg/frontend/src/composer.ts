// Pipeline composer rendering: palette, SVG canvas, parameter panel,
// validation badges. Pure render-to-string functions; main.ts wires events.

import type { CanvasModel, CanvasNode } from "./model.js";
import { inferForm } from "./model.js";
import { escapeHtml } from "./trace.js";
import type { Role } from "./types.js";
import { ROLES } from "./types.js";

const NODE_W = 150;
const NODE_H = 56;

export function renderPalette(model: CanvasModel): string {
  const groups = ROLES.map((role) => {
    const options = model
      .componentsForRole(role)
      .map((c) => `<option value="${c.name}">${c.name}</option>`)
      .join("");
    const disabled = model.nodeForRole(role) ? "disabled" : "";
    return (
      `<div class="palette-role">` +
      `<label>${role.replaceAll("_", " ")}</label>` +
      `<select data-palette-role="${role}" ${disabled}>${options}</select>` +
      `<button data-add-role="${role}" ${disabled}>add</button>` +
      `</div>`
    );
  }).join("");
  return `<div class="palette">${groups}</div>`;
}

export function renderBadges(model: CanvasModel): string {
  const badges = model.badges();
  if (badges.length === 0) {
    return `<div class="badges ok"><span class="badge pass">pipeline complete</span></div>`;
  }
  const items = badges.map((b) => `<span class="badge block">${escapeHtml(b)}</span>`).join("");
  return `<div class="badges">${items}</div>`;
}

function nodeBox(node: CanvasNode, selected: boolean): string {
  const cls = selected ? "node selected" : "node";
  const sourceTag =
    node.source.type === "registry" ? `<span class="tag">@${node.source.commit_id.slice(0, 8)}</span>` : "";
  return (
    `<g class="${cls}" data-node="${node.id}" transform="translate(${node.x},${node.y})">` +
    `<rect width="${NODE_W}" height="${NODE_H}" rx="8"></rect>` +
    `<text x="10" y="22" class="role">${node.role.replaceAll("_", " ")}</text>` +
    `<text x="10" y="42" class="name">${escapeHtml(node.componentName)}</text>` +
    sourceTag +
    `</g>`
  );
}

function edgeLine(model: CanvasModel, from: string, to: string): string {
  const a = model.node(from);
  const b = model.node(to);
  if (!a || !b) return "";
  const x1 = a.x + NODE_W / 2;
  const y1 = a.y + NODE_H / 2;
  const x2 = b.x + NODE_W / 2;
  const y2 = b.y + NODE_H / 2;
  return `<line x1="${x1}" y1="${y1}" x2="${x2}" y2="${y2}" marker-end="url(#arrow)"></line>`;
}

export function renderCanvas(model: CanvasModel, selectedNode: string | null): string {
  const edges = model.edges.map((e) => edgeLine(model, e.from, e.to)).join("");
  const nodes = model.nodes.map((n) => nodeBox(n, n.id === selectedNode)).join("");
  return (
    `<svg class="canvas" viewBox="0 0 760 380">` +
    `<defs><marker id="arrow" markerWidth="10" markerHeight="8" refX="9" refY="4" orient="auto">` +
    `<path d="M0,0 L10,4 L0,8 z"></path></marker></defs>` +
    edges +
    nodes +
    `</svg>`
  );
}

export function renderParamPanel(model: CanvasModel, nodeId: string | null, errors: Record<string, string>): string {
  if (!nodeId) {
    return `<div class="params"><em>select a node to edit its parameters</em></div>`;
  }
  const node = model.node(nodeId);
  if (!node) return `<div class="params"></div>`;
  const schema = model.schemaFor(node.role, node.componentName) ?? [];
  const form = inferForm(schema);
  const componentOptions = model
    .componentsForRole(node.role)
    .map(
      (c) =>
        `<option value="${c.name}" ${c.name === node.componentName ? "selected" : ""}>${c.name}</option>`,
    )
    .join("");
  const fields = form
    .map((field) => {
      const current = node.params[field.name] ?? field.default;
      const error = errors[field.name]
        ? `<span class="field-error">${escapeHtml(errors[field.name])}</span>`
        : "";
      let control: string;
      if (field.widget === "toggle") {
        control = `<input type="checkbox" data-param="${field.name}" ${current ? "checked" : ""}>`;
      } else if (field.widget === "choice") {
        const options = (field.choices ?? [])
          .map((c) => `<option value="${c}" ${c === current ? "selected" : ""}>${c}</option>`)
          .join("");
        control = `<select data-param="${field.name}">${options}</select>`;
      } else if (field.widget === "number") {
        const min = field.min !== undefined ? `min="${field.min}"` : "";
        const max = field.max !== undefined ? `max="${field.max}"` : "";
        const step = field.kind === "int" ? `step="1"` : `step="any"`;
        control = `<input type="number" data-param="${field.name}" value="${current}" ${min} ${max} ${step}>`;
      } else {
        control = `<input type="text" data-param="${field.name}" value="${escapeHtml(String(current))}">`;
      }
      const hint = field.description ? `<small>${escapeHtml(field.description)}</small>` : "";
      return `<div class="field"><label>${field.name}</label>${control}${error}${hint}</div>`;
    })
    .join("");
  return (
    `<div class="params" data-node-panel="${node.id}">` +
    `<h3>${node.id}</h3>` +
    `<div class="field"><label>component</label><select data-component-select>${componentOptions}</select></div>` +
    fields +
    `<button data-remove-node="${node.id}" class="danger">remove node</button>` +
    `</div>`
  );
}
