import { FetchLike } from "../src/api.js";

export interface RecordedCall {
  url: string;
  method: string;
  body: unknown;
}

/**
 * Scripted fetch stub: responds from a queue of route matchers and records
 * every call so tests can assert on exact traffic (including "none").
 */
export class FakeFetch {
  calls: RecordedCall[] = [];
  private routes: Array<{
    match: (url: string, method: string) => boolean;
    respond: () => { status: number; body: unknown } | { status: number; body: unknown }[];
    queue?: { status: number; body: unknown }[];
  }> = [];

  on(
    method: string,
    urlPart: string,
    ...responses: { status: number; body: unknown }[]
  ): void {
    this.routes.push({
      match: (url, m) => m === method && url.includes(urlPart),
      respond: () => responses,
      queue: [...responses],
    });
  }

  fetch: FetchLike = async (url, init) => {
    const method = init?.method ?? "GET";
    let body: unknown = undefined;
    if (init?.body) {
      try {
        body = JSON.parse(init.body as string);
      } catch {
        body = init.body;
      }
    }
    this.calls.push({ url, method, body });
    for (const route of this.routes) {
      if (route.match(url, method)) {
        const queue = route.queue as { status: number; body: unknown }[];
        const next = queue.length > 1 ? queue.shift()! : queue[0];
        const payload =
          typeof next.body === "string" ? next.body : JSON.stringify(next.body);
        return new Response(payload, {
          status: next.status,
          headers: { "Content-Type": "application/json" },
        });
      }
    }
    return new Response(JSON.stringify({ error: "NotFound", message: url }), { status: 404 });
  };
}

export function ndjson(entries: unknown[]): string {
  return entries.map((e) => JSON.stringify(e)).join("\n") + (entries.length ? "\n" : "");
}
