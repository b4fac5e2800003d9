// Value shapes exchanged with the /v1 API. The server is the source of
// truth; these mirror its canonical JSON bodies.

export type Role =
  | "query_generator"
  | "search_backend"
  | "snippet_classifier"
  | "document_classifier"
  | "stopping_strategy";

export const ROLES: Role[] = [
  "query_generator",
  "search_backend",
  "snippet_classifier",
  "document_classifier",
  "stopping_strategy",
];

export interface SchemaEntry {
  name: string;
  kind: "int" | "float" | "string" | "bool" | "enum";
  default: unknown;
  min?: number;
  max?: number;
  choices?: string[];
  description?: string;
  required: boolean;
}

export interface CatalogComponent {
  role: Role;
  name: string;
  schema: SchemaEntry[];
}

export interface Catalog {
  components: CatalogComponent[];
  adjacency: [string, string][];
}

export interface ComponentSourceValue {
  type: "builtin" | "registry";
  commit_id?: string;
  path?: string;
}

export interface ComponentRefValue {
  role: Role;
  name: string;
  source: ComponentSourceValue;
  external: boolean;
  params: Record<string, unknown>;
}

export interface PipelineNodeValue {
  node_id: string;
  component: ComponentRefValue;
}

export interface PipelineGraphValue {
  nodes: PipelineNodeValue[];
  edges: { from: string; to: string }[];
}

export interface BundleValue {
  format_version: string;
  engine_version: string;
  template_ref: { name: string; version: number };
  pipeline: PipelineGraphValue;
  seeds: { master: number };
  repetitions: number;
  run_params?: { costs: Record<string, number>; budget: number };
  aux_files: unknown[];
  meta: { created_utc: string; author: string };
}

export interface ApiErrorValue {
  http_status: number;
  code: string;
  detail: string;
  offending_field?: string;
}

export interface RunRecordValue {
  run_id: string;
  bundle_hash: string;
  status: "QUEUED" | "RUNNING" | "COMPLETED" | "FAILED";
  started: string;
  finished: string;
  log: string;
  outputs: { traces: string[]; measures: string } | null;
  failure: { code: string; detail: string; node_id?: string } | null;
}

export interface TraceEventValue {
  seq: number;
  user: number;
  topic_id: string;
  sim_time: number;
  action: string;
  payload: Record<string, unknown>;
}

export interface MeasuresValue {
  users: Record<string, unknown>[];
  mean: Record<string, number>;
}

export interface TemplateListEntry {
  name: string;
  active: number;
  versions: number[];
}

export interface TemplateValue {
  name: string;
  engine_version: string;
  dataset: Record<string, { path: string; sha256: string }>;
  backend: { type: string; params: Record<string, unknown> };
  baselines: PipelineGraphValue[];
  version: number;
  status: "active" | "superseded";
}

export interface CommitReply {
  commit_id: string;
  tree_hash: string;
  parent: string | null;
}

export interface CommitTreeValue {
  commit: {
    commit_id: string;
    parent: string | null;
    tree_hash: string;
    author: string;
    message: string;
    category: string;
    stored_at: string;
  };
  files: Record<string, string>;
}

export interface CheckReportValue {
  ok: boolean;
  findings: { code: string; severity: string; detail: string }[];
}

export interface VerifyResultValue {
  status: "PASS" | "FAIL" | "SCOPE_LIMITED";
  first_divergent_user: number | null;
}
