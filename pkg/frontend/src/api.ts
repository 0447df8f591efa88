/**
 * Typed client for the portal REST routes.
 *
 * This is the only place the client talks to the server; everything else
 * consumes the documented wire formats through it.
 */

export interface ServiceEntry {
  id: string;
  label: string;
  icon: string;
}

export interface ServicesResponse {
  fragment: string;
  services: ServiceEntry[];
}

export interface ThreadPost {
  author: string;
  timestamp: number;
  body: string;
}

export interface Thread {
  id: string;
  anchor: { doc: string; revision: number; fragment: string };
  title: string;
  posts: ThreadPost[];
}

export interface FoldResponse {
  session: string;
  folded: string[];
}

export class PortalError extends Error {
  constructor(
    message: string,
    readonly status: number,
    readonly code?: string,
  ) {
    super(message);
  }
}

async function raiseForStatus(response: Response): Promise<Response> {
  if (response.ok) return response;
  let code: string | undefined;
  let message = `${response.status}`;
  try {
    const body = await response.json();
    code = body.code;
    message = body.message ?? message;
  } catch {
    /* non-JSON error body */
  }
  throw new PortalError(message, response.status, code);
}

export class PortalClient {
  private session: string | null = null;

  constructor(
    private readonly base: string = "",
    private readonly writeToken: string = "",
  ) {}

  get sessionId(): string | null {
    return this.session;
  }

  private headers(extra: Record<string, string> = {}): Record<string, string> {
    const out: Record<string, string> = { ...extra };
    if (this.session) out["X-Session"] = this.session;
    if (this.writeToken) out["X-Write-Token"] = this.writeToken;
    return out;
  }

  private remember(response: Response): void {
    const session = response.headers.get("X-Session");
    if (session) this.session = session;
  }

  async documentHtml(path: string, rev?: number): Promise<string> {
    const query = rev === undefined ? "" : `?rev=${rev}`;
    const response = await raiseForStatus(
      await fetch(`${this.base}/doc/${path}${query}`, { headers: this.headers() }),
    );
    this.remember(response);
    return response.text();
  }

  async services(fragment: string): Promise<ServicesResponse> {
    const response = await raiseForStatus(
      await fetch(`${this.base}/services?fragment=${encodeURIComponent(fragment)}`),
    );
    return response.json();
  }

  async definitionHtml(symbol: string): Promise<string> {
    const response = await raiseForStatus(
      await fetch(`${this.base}/definition?symbol=${encodeURIComponent(symbol)}`),
    );
    return response.text();
  }

  async prerequisitesSvg(uri: string): Promise<string> {
    const response = await raiseForStatus(
      await fetch(`${this.base}/prereq?uri=${encodeURIComponent(uri)}&format=svg`),
    );
    return response.text();
  }

  async threadsForDocument(doc: string): Promise<Thread[]> {
    const response = await raiseForStatus(
      await fetch(`${this.base}/threads?doc=${encodeURIComponent(doc)}`),
    );
    return (await response.json()).threads;
  }

  async threadsForFragment(fragment: string): Promise<Thread[]> {
    const response = await raiseForStatus(
      await fetch(`${this.base}/threads?fragment=${encodeURIComponent(fragment)}`),
    );
    return (await response.json()).threads;
  }

  async createThread(
    anchor: Thread["anchor"],
    title: string,
    body: string,
    author: string,
  ): Promise<Thread> {
    const response = await raiseForStatus(
      await fetch(`${this.base}/threads`, {
        method: "POST",
        headers: this.headers({ "Content-Type": "application/json" }),
        body: JSON.stringify({ anchor, title, body, author }),
      }),
    );
    return response.json();
  }

  async setFold(fragment: string, folded: boolean): Promise<FoldResponse> {
    const response = await raiseForStatus(
      await fetch(`${this.base}/folds`, {
        method: "POST",
        headers: this.headers({ "Content-Type": "application/json" }),
        body: JSON.stringify({ fragment, folded }),
      }),
    );
    this.remember(response);
    return response.json();
  }
}
