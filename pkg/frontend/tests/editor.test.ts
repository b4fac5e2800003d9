import { describe, expect, it } from "vitest";

import { ApiError, type ApiClient } from "../src/api.js";
import { EditorController, MANIFEST_FILE, buildTree, type EditorState } from "../src/editor.js";
import type { CheckReportValue, CommitReply } from "../src/types.js";

const STATE: EditorState = {
  namespace: "me",
  name: "my_stopper",
  category: "stopping_strategy",
  entrypoint: ["python3", "main.py"],
  code: "print('hi')\n",
  codeFile: "main.py",
  schemaText: "",
  external: false,
};

describe("buildTree", () => {
  it("writes the manifest and the code file", () => {
    const tree = buildTree(STATE);
    expect(Object.keys(tree).sort()).toEqual([MANIFEST_FILE, "main.py"]);
    const manifest = JSON.parse(tree[MANIFEST_FILE]);
    expect(manifest).toEqual({
      name: "my_stopper",
      category: "stopping_strategy",
      entrypoint: ["python3", "main.py"],
      external: false,
    });
  });

  it("includes the schema file only when non-empty", () => {
    const withSchema = buildTree({ ...STATE, schemaText: "[]" });
    expect(Object.keys(withSchema)).toContain("schema.canon.json");
    const without = buildTree({ ...STATE, schemaText: "   " });
    expect(Object.keys(without)).not.toContain("schema.canon.json");
  });
});

interface FakeCalls {
  commits: unknown[];
}

function fakeEditorClient(
  report: CheckReportValue,
  commitResult: CommitReply | "conflict",
): { client: ApiClient; calls: FakeCalls } {
  const calls: FakeCalls = { commits: [] };
  const client = {
    async checkComponent(): Promise<CheckReportValue> {
      return report;
    },
    async commitComponent(
      namespace: string,
      name: string,
      files: Record<string, string>,
      author: string,
      message: string,
      expectedParent?: string | null,
    ): Promise<CommitReply> {
      calls.commits.push({ namespace, name, files, author, message, expectedParent });
      if (commitResult === "conflict") {
        throw new ApiError({ http_status: 409, code: "CONCURRENT_HEAD", detail: "head moved" });
      }
      return commitResult;
    },
  } as unknown as ApiClient;
  return { client, calls };
}

describe("EditorController.save", () => {
  const okReport: CheckReportValue = { ok: true, findings: [] };
  const blockedReport: CheckReportValue = {
    ok: false,
    findings: [{ code: "EMPTY_ENTRYPOINT", severity: "error", detail: "entrypoint is empty" }],
  };
  const reply: CommitReply = { commit_id: "c".repeat(64), tree_hash: "t".repeat(64), parent: null };

  it("commits when the static check passes", async () => {
    const { client, calls } = fakeEditorClient(okReport, reply);
    const controller = new EditorController(client);
    const outcome = await controller.save(STATE, "me", "first");
    expect(outcome.committed).toEqual(reply);
    expect(outcome.conflict).toBe(false);
    expect(calls.commits).toHaveLength(1);
    expect(controller.lastHead).toBe(reply.commit_id);
  });

  it("blocks the commit when findings have severity error", async () => {
    const { client, calls } = fakeEditorClient(blockedReport, reply);
    const controller = new EditorController(client);
    const outcome = await controller.save(STATE, "me", "first");
    expect(outcome.committed).toBeNull();
    expect(outcome.report.findings[0].code).toBe("EMPTY_ENTRYPOINT");
    expect(calls.commits).toHaveLength(0);
  });

  it("signals CONCURRENT_HEAD as a reload prompt", async () => {
    const { client } = fakeEditorClient(okReport, "conflict");
    const controller = new EditorController(client);
    const outcome = await controller.save(STATE, "me", "first");
    expect(outcome.conflict).toBe(true);
    expect(outcome.committed).toBeNull();
  });

  it("passes the last head as expected_parent for compare-and-set", async () => {
    const { client, calls } = fakeEditorClient(okReport, reply);
    const controller = new EditorController(client);
    await controller.save(STATE, "me", "first");
    await controller.save(STATE, "me", "second");
    expect((calls.commits[0] as { expectedParent: unknown }).expectedParent).toBeNull();
    expect((calls.commits[1] as { expectedParent: unknown }).expectedParent).toBe(reply.commit_id);
  });
});

describe("EditorController.history", () => {
  it("walks parent links newest-first", async () => {
    const commits: Record<string, { parent: string | null; message: string }> = {
      aaa: { parent: "bbb", message: "v2" },
      bbb: { parent: null, message: "v1" },
    };
    const client = {
      async getComponentTree(commitId: string) {
        const c = commits[commitId];
        return {
          commit: {
            commit_id: commitId,
            parent: c.parent,
            tree_hash: "t".repeat(64),
            author: "me",
            message: c.message,
            category: "stopping_strategy",
            stored_at: "",
          },
          files: {},
        };
      },
    } as unknown as ApiClient;
    const controller = new EditorController(client);
    const history = await controller.history("aaa");
    expect(history.map((c) => c.message)).toEqual(["v2", "v1"]);
  });
});
