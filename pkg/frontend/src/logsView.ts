/**
 * Log viewer with cursor-based follow.
 *
 * Follow mode polls with a monotone `from` cursor. Because the cursor is
 * inclusive and timestamps can collide, a bounded seen-set of entry keys
 * guarantees no entry is ever rendered twice, even when polls overlap.
 */

import { ApiClient, ApiError, LogEntry } from "./api.js";

export interface LogView {
  appendEntries(entries: LogEntry[]): void;
  showAccessMessage(message: string): void;
}

function entryKey(e: LogEntry): string {
  return `${e.timestamp}|${e.instance}|${e.message}`;
}

export class LogFollower {
  private cursor: string | undefined;
  private seen = new Set<string>();
  private seenOrder: string[] = [];
  private polling = false;

  constructor(
    private api: ApiClient,
    private view: LogView,
    private project: string,
    private user?: string,
    private seenLimit = 4096,
  ) {}

  /** One poll step; safe to call concurrently with itself. */
  async poll(): Promise<LogEntry[]> {
    if (this.polling) {
      return [];
    }
    this.polling = true;
    try {
      let entries: LogEntry[];
      try {
        entries = await this.api.queryLogs(this.project, {
          user: this.user,
          from: this.cursor,
        });
      } catch (err) {
        const apiErr = err as ApiError;
        if (apiErr.status === 403) {
          this.view.showAccessMessage("You do not have access to these logs.");
          return [];
        }
        throw err;
      }
      const fresh = entries.filter((e) => !this.seen.has(entryKey(e)));
      for (const e of fresh) {
        const key = entryKey(e);
        this.seen.add(key);
        this.seenOrder.push(key);
      }
      while (this.seenOrder.length > this.seenLimit) {
        this.seen.delete(this.seenOrder.shift() as string);
      }
      if (entries.length > 0) {
        // Timestamps are fixed-width UTC, so string order is time order.
        this.cursor = entries[entries.length - 1].timestamp;
      }
      if (fresh.length > 0) {
        this.view.appendEntries(fresh);
      }
      return fresh;
    } finally {
      this.polling = false;
    }
  }
}
