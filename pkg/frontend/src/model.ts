// Canvas state for the pipeline composer. The model never invents policy:
// legal edges come from the catalog's published adjacency table and
// parameter rules come from the published schemas, so everything shown in
// the UI originates from server data.

import type {
  Catalog,
  CatalogComponent,
  BundleValue,
  PipelineGraphValue,
  Role,
  SchemaEntry,
} from "./types.js";
import { ROLES } from "./types.js";

export interface CanvasNode {
  id: string;
  role: Role;
  componentName: string;
  source: { type: "builtin" } | { type: "registry"; commit_id: string; path: string };
  external: boolean;
  params: Record<string, unknown>;
  x: number;
  y: number;
}

export interface CanvasEdge {
  from: string;
  to: string;
}

export interface FormField {
  name: string;
  widget: "number" | "text" | "toggle" | "choice";
  kind: SchemaEntry["kind"];
  default: unknown;
  min?: number;
  max?: number;
  choices?: string[];
  description?: string;
  required: boolean;
}

const WIDGETS: Record<SchemaEntry["kind"], FormField["widget"]> = {
  int: "number",
  float: "number",
  string: "text",
  bool: "toggle",
  enum: "choice",
};

/** One form field per schema entry, order preserved. */
export function inferForm(schema: SchemaEntry[]): FormField[] {
  return schema.map((entry) => ({
    name: entry.name,
    widget: WIDGETS[entry.kind],
    kind: entry.kind,
    default: entry.default,
    min: entry.min,
    max: entry.max,
    choices: entry.choices,
    description: entry.description,
    required: entry.required,
  }));
}

/** Null when the value satisfies the entry, else a short problem string. */
export function checkParamValue(entry: SchemaEntry, value: unknown): string | null {
  switch (entry.kind) {
    case "bool":
      if (typeof value !== "boolean") return "expected a boolean";
      return null;
    case "int":
      if (typeof value !== "number" || !Number.isInteger(value)) return "expected an integer";
      break;
    case "float":
      if (typeof value !== "number" || !Number.isFinite(value)) return "expected a number";
      break;
    case "string":
      if (typeof value !== "string") return "expected a string";
      return null;
    case "enum":
      if (typeof value !== "string") return "expected a string";
      if (entry.choices && !entry.choices.includes(value)) {
        return `must be one of ${entry.choices.join(", ")}`;
      }
      return null;
  }
  const num = value as number;
  if (entry.min !== undefined && num < entry.min) return `below minimum ${entry.min}`;
  if (entry.max !== undefined && num > entry.max) return `above maximum ${entry.max}`;
  return null;
}

export interface EdgeRefusal {
  code: "BAD_EDGE";
  hint: string;
}

export class CanvasModel {
  nodes: CanvasNode[] = [];
  edges: CanvasEdge[] = [];
  dirty = false;

  constructor(public catalog: Catalog) {}

  componentsForRole(role: Role): CatalogComponent[] {
    return this.catalog.components.filter((c) => c.role === role);
  }

  schemaFor(role: Role, name: string): SchemaEntry[] | null {
    const found = this.catalog.components.find((c) => c.role === role && c.name === name);
    return found ? found.schema : null;
  }

  node(id: string): CanvasNode | undefined {
    return this.nodes.find((n) => n.id === id);
  }

  nodeForRole(role: Role): CanvasNode | undefined {
    return this.nodes.find((n) => n.role === role);
  }

  addNode(role: Role, componentName: string, x = 0, y = 0): CanvasNode | EdgeRefusal {
    if (this.nodeForRole(role)) {
      return { code: "BAD_EDGE", hint: `a ${role} node already exists` };
    }
    if (!this.schemaFor(role, componentName)) {
      return { code: "BAD_EDGE", hint: `no catalog component ${componentName} for ${role}` };
    }
    const node: CanvasNode = {
      id: role.split("_")[0] === "search" ? "backend" : role.split("_")[0],
      role,
      componentName,
      source: { type: "builtin" },
      external: false,
      params: {},
      x,
      y,
    };
    // Keep ids unique if an unusual role mix ever collides.
    while (this.node(node.id)) {
      node.id = `${node.id}x`;
    }
    this.nodes.push(node);
    this.dirty = true;
    return node;
  }

  removeNode(id: string): void {
    this.nodes = this.nodes.filter((n) => n.id !== id);
    this.edges = this.edges.filter((e) => e.from !== id && e.to !== id);
    this.dirty = true;
  }

  /** Edge legality comes from the catalog's adjacency table only. */
  edgeAllowed(fromRole: Role, toRole: Role): boolean {
    return this.catalog.adjacency.some(([a, b]) => a === fromRole && b === toRole);
  }

  connect(fromId: string, toId: string): CanvasEdge | EdgeRefusal {
    const from = this.node(fromId);
    const to = this.node(toId);
    if (!from || !to) {
      return { code: "BAD_EDGE", hint: "both endpoints must exist" };
    }
    if (!this.edgeAllowed(from.role, to.role)) {
      return { code: "BAD_EDGE", hint: `${from.role} -> ${to.role} is not in the adjacency table` };
    }
    if (this.edges.some((e) => e.from === fromId && e.to === toId)) {
      return { code: "BAD_EDGE", hint: "edge already drawn" };
    }
    const edge = { from: fromId, to: toId };
    this.edges.push(edge);
    this.dirty = true;
    return edge;
  }

  setParam(nodeId: string, key: string, value: unknown): string | null {
    const node = this.node(nodeId);
    if (!node) return "unknown node";
    const schema = this.schemaFor(node.role, node.componentName) ?? [];
    const entry = schema.find((e) => e.name === key);
    if (!entry) return "unknown parameter";
    const problem = checkParamValue(entry, value);
    if (problem === null) {
      node.params[key] = value;
      this.dirty = true;
    }
    return problem;
  }

  setComponent(nodeId: string, componentName: string): string | null {
    const node = this.node(nodeId);
    if (!node) return "unknown node";
    if (!this.schemaFor(node.role, componentName)) return "unknown component";
    node.componentName = componentName;
    node.source = { type: "builtin" };
    node.params = {};
    this.dirty = true;
    return null;
  }

  setRegistryComponent(nodeId: string, name: string, commitId: string, path = "component.canon.json"): string | null {
    const node = this.node(nodeId);
    if (!node) return "unknown node";
    node.componentName = name;
    node.source = { type: "registry", commit_id: commitId, path };
    node.params = {};
    this.dirty = true;
    return null;
  }

  missingRoles(): Role[] {
    return ROLES.filter((role) => !this.nodeForRole(role));
  }

  /** Blocking badges shown on the canvas; empty means composable. */
  badges(): string[] {
    const badges = this.missingRoles().map((role) => `missing ${role}`);
    if (this.nodes.length > 0 && !this.weaklyConnected()) {
      badges.push("graph is not connected");
    }
    return badges;
  }

  weaklyConnected(): boolean {
    if (this.nodes.length === 0) return true;
    const neighbours = new Map<string, string[]>(this.nodes.map((n) => [n.id, []]));
    for (const edge of this.edges) {
      neighbours.get(edge.from)?.push(edge.to);
      neighbours.get(edge.to)?.push(edge.from);
    }
    const seen = new Set<string>([this.nodes[0].id]);
    const stack = [this.nodes[0].id];
    while (stack.length) {
      for (const next of neighbours.get(stack.pop()!) ?? []) {
        if (!seen.has(next)) {
          seen.add(next);
          stack.push(next);
        }
      }
    }
    return seen.size === this.nodes.length;
  }

  serialize(): PipelineGraphValue {
    return {
      nodes: this.nodes.map((n) => ({
        node_id: n.id,
        component: {
          role: n.role,
          name: n.componentName,
          source: n.source,
          external: n.external,
          params: { ...n.params },
        },
      })),
      edges: this.edges.map((e) => ({ from: e.from, to: e.to })),
    };
  }

  loadPipeline(pipeline: PipelineGraphValue): void {
    this.nodes = pipeline.nodes.map((n, i) => ({
      id: n.node_id,
      role: n.component.role,
      componentName: n.component.name,
      source: n.component.source as CanvasNode["source"],
      external: n.component.external,
      params: { ...n.component.params },
      x: 40 + i * 150,
      y: 60 + (i % 2) * 120,
    }));
    this.edges = pipeline.edges.map((e) => ({ from: e.from, to: e.to }));
    this.dirty = false;
  }

  buildBundle(options: {
    engineVersion: string;
    templateName: string;
    templateVersion: number;
    masterSeed: number;
    repetitions: number;
    author: string;
  }): BundleValue {
    return {
      format_version: "1",
      engine_version: options.engineVersion,
      template_ref: { name: options.templateName, version: options.templateVersion },
      pipeline: this.serialize(),
      seeds: { master: options.masterSeed },
      repetitions: options.repetitions,
      aux_files: [],
      meta: { created_utc: new Date().toISOString().replace(/\.\d+Z$/, "+00:00"), author: options.author },
    };
  }
}
