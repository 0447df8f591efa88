/**
 * Test scaffolding: a fetch stub that serves genuine portal responses
 * captured by scripts/record_frontend_fixtures.py, with just enough state
 * (per-session fold sets) to reproduce the server's observable behavior.
 */

import { readFileSync } from "node:fs";
import { fileURLToPath } from "node:url";
import { dirname, join } from "node:path";

const here = dirname(fileURLToPath(import.meta.url));

export interface Recording {
  doc: { path: string; unfolded: string; folded: Record<string, string> };
  services: Record<string, { fragment: string; services: { id: string; label: string; icon: string }[] }>;
  definition: Record<string, string>;
  prereq_svg: Record<string, string>;
  threads: Record<string, { threads: unknown[] }>;
}

export const recording: Recording = JSON.parse(
  readFileSync(join(here, "fixtures", "recorded.json"), "utf-8"),
);

export interface FakePortalOptions {
  failFolds?: boolean;
  failServices?: boolean;
}

export class FakePortal {
  readonly folds = new Map<string, Set<string>>();
  readonly requests: { method: string; url: string; body?: unknown }[] = [];
  private sessions = 0;

  constructor(private readonly options: FakePortalOptions = {}) {}

  install(): void {
    globalThis.fetch = this.handle.bind(this) as typeof fetch;
  }

  private json(body: unknown, status = 200, headers: Record<string, string> = {}): Response {
    return new Response(JSON.stringify(body), {
      status,
      headers: { "Content-Type": "application/json", ...headers },
    });
  }

  private html(body: string, headers: Record<string, string> = {}): Response {
    return new Response(body, {
      status: 200,
      headers: { "Content-Type": "text/html; charset=utf-8", ...headers },
    });
  }

  private error(status: number, code: string): Response {
    return this.json({ code, message: code, detail: null }, status);
  }

  async handle(input: RequestInfo | URL, init: RequestInit = {}): Promise<Response> {
    const url = new URL(String(input), "http://portal.test");
    const method = (init.method ?? "GET").toUpperCase();
    const headers = new Headers(init.headers);
    const rawBody = typeof init.body === "string" ? init.body : undefined;
    const body = rawBody ? JSON.parse(rawBody) : undefined;
    this.requests.push({ method, url: url.pathname + url.search, body });

    if (method === "POST" && url.pathname === "/folds") {
      if (this.options.failFolds) return this.error(500, "Unavailable");
      const session = headers.get("X-Session") ?? `s${++this.sessions}`;
      const set = this.folds.get(session) ?? new Set<string>();
      if (body.folded) set.add(body.fragment);
      else set.delete(body.fragment);
      this.folds.set(session, set);
      return this.json(
        { session, folded: [...set].sort() },
        200,
        { "X-Session": session },
      );
    }
    if (method === "GET" && url.pathname.startsWith("/doc/")) {
      const session = headers.get("X-Session");
      const set = session ? this.folds.get(session) : undefined;
      if (set && set.size) {
        const folded = [...set].sort().join(",");
        const bodyHtml = recording.doc.folded[folded];
        if (bodyHtml === undefined) return this.error(500, "UnrecordedFoldState");
        return this.html(bodyHtml);
      }
      return this.html(recording.doc.unfolded);
    }
    if (method === "GET" && url.pathname === "/services") {
      if (this.options.failServices) return this.error(500, "Unavailable");
      const fragment = url.searchParams.get("fragment") ?? "";
      const recorded = recording.services[fragment];
      return recorded ? this.json(recorded) : this.error(404, "UnknownFragment");
    }
    if (method === "GET" && url.pathname === "/definition") {
      const symbol = url.searchParams.get("symbol") ?? "";
      const recorded = recording.definition[symbol];
      return recorded ? this.html(recorded) : this.error(404, "NotFound");
    }
    if (method === "GET" && url.pathname === "/prereq") {
      const uri = url.searchParams.get("uri") ?? "";
      const recorded = recording.prereq_svg[uri];
      return recorded
        ? new Response(recorded, { status: 200, headers: { "Content-Type": "image/svg+xml" } })
        : this.error(404, "UnknownNode");
    }
    if (method === "GET" && url.pathname === "/threads") {
      const key = url.searchParams.get("doc") ?? url.searchParams.get("fragment") ?? "";
      return this.json(recording.threads[key] ?? { threads: [] });
    }
    return this.error(404, "NotFound");
  }
}

/** Mount the recorded rendered document and return its root element. */
export function mountDocument(html: string = recording.doc.unfolded): HTMLElement {
  document.body.innerHTML = "";
  const host = document.createElement("div");
  host.innerHTML = html;
  document.body.appendChild(host);
  return host.firstElementChild as HTMLElement;
}
