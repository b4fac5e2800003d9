// Component editor controller: static-check gate, commit-on-save, linear
// history walk. DOM-free so the save gating is directly testable.

import { ApiClient, ApiError } from "./api.js";
import type { CheckReportValue, CommitReply, CommitTreeValue, Role } from "./types.js";

export const MANIFEST_FILE = "component.canon.json";

export interface EditorState {
  namespace: string;
  name: string;
  category: Role;
  entrypoint: string[];
  code: string;
  codeFile: string;
  schemaText: string; // optional schema.canon.json body, empty = none
  external: boolean;
}

export function buildTree(state: EditorState): Record<string, string> {
  const manifest = {
    name: state.name,
    category: state.category,
    entrypoint: state.entrypoint,
    external: state.external,
  };
  const files: Record<string, string> = {
    [MANIFEST_FILE]: JSON.stringify(manifest),
    [state.codeFile]: state.code,
  };
  if (state.schemaText.trim().length > 0) {
    files["schema.canon.json"] = state.schemaText;
  }
  return files;
}

export interface SaveOutcome {
  committed: CommitReply | null;
  report: CheckReportValue;
  conflict: boolean;
}

export class EditorController {
  lastHead: string | null = null;

  constructor(private readonly client: ApiClient) {}

  async check(state: EditorState): Promise<CheckReportValue> {
    return this.client.checkComponent(buildTree(state));
  }

  /** Save = static check, then commit; findings with severity error block. */
  async save(state: EditorState, author: string, message: string): Promise<SaveOutcome> {
    const report = await this.client.checkComponent(buildTree(state));
    if (!report.ok) {
      return { committed: null, report, conflict: false };
    }
    try {
      const committed = await this.client.commitComponent(
        state.namespace,
        state.name,
        buildTree(state),
        author,
        message,
        this.lastHead,
      );
      this.lastHead = committed.commit_id;
      return { committed, report, conflict: false };
    } catch (error) {
      if (error instanceof ApiError && error.code === "CONCURRENT_HEAD") {
        return { committed: null, report, conflict: true };
      }
      throw error;
    }
  }

  /** Walk parent links from a head commit; newest first. */
  async history(headCommitId: string, limit = 20): Promise<CommitTreeValue["commit"][]> {
    const commits: CommitTreeValue["commit"][] = [];
    let current: string | null = headCommitId;
    while (current !== null && commits.length < limit) {
      const tree: CommitTreeValue = await this.client.getComponentTree(current);
      commits.push(tree.commit);
      current = tree.commit.parent;
    }
    return commits;
  }
}

export const DEFAULT_COMPONENT_CODE = `import json
import sys

# A stopping strategy: reply to "decide" with CONTINUE, NEXT_QUERY or END.
for line in sys.stdin:
    line = line.strip()
    if not line:
        continue
    request = json.loads(line)
    op = request.get("op")
    if op == "init":
        reply = {"ok": True}
    elif op == "decide":
        state = request.get("state_summary", {})
        done = state.get("snippets_examined_this_serp", 0) >= 1
        reply = {"action": "END" if done else "CONTINUE"}
    else:
        reply = {"error": "unsupported op"}
    sys.stdout.write(json.dumps(reply) + "\\n")
    sys.stdout.flush()
`;
