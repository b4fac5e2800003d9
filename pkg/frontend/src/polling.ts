// Run polling over the offset-fetch log contract: status transitions come
// from GET /runs/{id}, log bytes are appended from ?from_byte= so bytes at
// an offset are fetched exactly once.

import type { ApiClient } from "./api.js";
import type { RunRecordValue } from "./types.js";

export interface PollUpdate {
  record: RunRecordValue;
  logChunk: string;
}

export class RunPoller {
  logText = "";
  statusesSeen: string[] = [];
  record: RunRecordValue | null = null;
  private logBytes = 0;

  constructor(
    private readonly client: ApiClient,
    private readonly runId: string,
  ) {}

  get finished(): boolean {
    return this.record !== null && (this.record.status === "COMPLETED" || this.record.status === "FAILED");
  }

  /** One poll step: fetch the record, then any new log bytes. */
  async step(): Promise<PollUpdate> {
    const record = await this.client.getRun(this.runId);
    this.record = record;
    if (this.statusesSeen[this.statusesSeen.length - 1] !== record.status) {
      this.statusesSeen.push(record.status);
    }
    const chunk = await this.client.getLog(this.runId, this.logBytes);
    this.logBytes += byteLength(chunk);
    this.logText += chunk;
    return { record, logChunk: chunk };
  }

  /** Poll until COMPLETED or FAILED; `sleep` is injectable for tests. */
  async waitForCompletion(
    intervalMs = 250,
    timeoutMs = 60_000,
    sleep: (ms: number) => Promise<void> = defaultSleep,
  ): Promise<RunRecordValue> {
    const deadline = Date.now() + timeoutMs;
    for (;;) {
      const { record } = await this.step();
      if (record.status === "COMPLETED" || record.status === "FAILED") {
        return record;
      }
      if (Date.now() > deadline) {
        throw new Error(`run ${this.runId} still ${record.status} after ${timeoutMs}ms`);
      }
      await sleep(intervalMs);
    }
  }
}

function byteLength(text: string): number {
  return new TextEncoder().encode(text).length;
}

function defaultSleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}
