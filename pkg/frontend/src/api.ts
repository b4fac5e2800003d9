// Thin typed client for the /v1 API. Every mutating call carries the
// bearer token; every JSON body is parsed as-is (the server emits
// canonical form, which is plain JSON to a reader).

import type {
  ApiErrorValue,
  BundleValue,
  Catalog,
  CheckReportValue,
  CommitReply,
  CommitTreeValue,
  MeasuresValue,
  RunRecordValue,
  TemplateListEntry,
  TemplateValue,
  VerifyResultValue,
} from "./types.js";

export class ApiError extends Error {
  constructor(public readonly value: ApiErrorValue) {
    super(`${value.code}: ${value.detail}`);
  }

  get code(): string {
    return this.value.code;
  }

  get offendingField(): string | undefined {
    return this.value.offending_field;
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    public baseUrl: string,
    public token: string = "",
    private readonly fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/$/, "") + path;
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const headers: Record<string, string> = {};
    if (body !== undefined) {
      headers["Content-Type"] = "application/json";
    }
    if (method !== "GET") {
      headers["Authorization"] = `Bearer ${this.token}`;
    }
    const response = await this.fetchImpl(this.url(path), {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!response.ok) {
      throw new ApiError((await response.json()) as ApiErrorValue);
    }
    return (await response.json()) as T;
  }

  private async requestText(path: string): Promise<string> {
    const response = await this.fetchImpl(this.url(path), { method: "GET" });
    if (!response.ok) {
      throw new ApiError((await response.json()) as ApiErrorValue);
    }
    return await response.text();
  }

  getCatalog(): Promise<Catalog> {
    return this.request("GET", "/v1/catalog");
  }

  postBundle(bundle: BundleValue): Promise<{ bundle_hash: string }> {
    return this.request("POST", "/v1/bundles", bundle);
  }

  getBundle(hash: string): Promise<BundleValue> {
    return this.request("GET", `/v1/bundles/${hash}`);
  }

  getBundleText(hash: string): Promise<string> {
    return this.requestText(`/v1/bundles/${hash}`);
  }

  submitRun(bundleHash: string): Promise<{ run_id: string }> {
    return this.request("POST", "/v1/runs", { bundle_hash: bundleHash });
  }

  submitBatch(bundleHashes: string[], parallelism: number): Promise<{ run_ids: string[] }> {
    return this.request("POST", "/v1/runs/batch", { bundle_hashes: bundleHashes, parallelism });
  }

  getRun(runId: string): Promise<RunRecordValue> {
    return this.request("GET", `/v1/runs/${runId}`);
  }

  getLog(runId: string, fromByte: number): Promise<string> {
    return this.requestText(`/v1/runs/${runId}/log?from_byte=${fromByte}`);
  }

  getTraceText(runId: string, user: number): Promise<string> {
    return this.requestText(`/v1/runs/${runId}/trace?user=${user}`);
  }

  getMeasures(runId: string): Promise<MeasuresValue> {
    return this.request("GET", `/v1/runs/${runId}/measures`);
  }

  verifyRun(runId: string, traceHashes: string[]): Promise<VerifyResultValue> {
    return this.request("POST", `/v1/runs/${runId}/verify`, { trace_hashes: traceHashes });
  }

  listTemplates(): Promise<{ templates: TemplateListEntry[] }> {
    return this.request("GET", "/v1/templates");
  }

  getTemplate(name: string, version: number | "active"): Promise<TemplateValue> {
    return this.request("GET", `/v1/templates/${name}/${version}`);
  }

  commitComponent(
    namespace: string,
    name: string,
    files: Record<string, string>,
    author: string,
    message: string,
    expectedParent?: string | null,
  ): Promise<CommitReply> {
    const body: Record<string, unknown> = { files, author, message };
    if (expectedParent !== undefined) {
      body["expected_parent"] = expectedParent;
    }
    return this.request("POST", `/v1/components/${namespace}/${name}`, body);
  }

  getComponentTree(commitId: string): Promise<CommitTreeValue> {
    return this.request("GET", `/v1/components/${commitId}/tree`);
  }

  listComponentHeads(): Promise<{ heads: { namespace: string; name: string; head: string }[] }> {
    return this.request("GET", "/v1/components");
  }

  checkComponent(files: Record<string, string>): Promise<CheckReportValue> {
    return this.request("POST", "/v1/components/check", { files });
  }
}
