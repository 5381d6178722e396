import type {
  MovementDoc, SchemaConfigDoc, SessionDetail, SessionStats, SessionSummary,
  TrialsDoc,
} from "./types.js";

export class ApiError extends Error {
  constructor(public status: number, message: string,
              public body: unknown = null) {
    super(message);
  }
}

async function parseError(resp: Response): Promise<ApiError> {
  let body: unknown = null;
  let message = `${resp.status} ${resp.statusText}`;
  try {
    body = await resp.json();
    const b = body as { error?: string; errors?: string[] };
    if (b.error) message = b.error;
    else if (b.errors) message = b.errors.join("; ");
  } catch {
    // non-JSON error body; keep the status line
  }
  return new ApiError(resp.status, message, body);
}

export class ApiClient {
  constructor(private base = "") {}

  private async get<T>(path: string): Promise<T> {
    const resp = await fetch(this.base + path);
    if (!resp.ok) throw await parseError(resp);
    return resp.json() as Promise<T>;
  }

  sessions(): Promise<SessionSummary[]> {
    return this.get("/api/sessions");
  }

  session(id: string): Promise<SessionDetail> {
    return this.get(`/api/sessions/${encodeURIComponent(id)}`);
  }

  trials(id: string): Promise<TrialsDoc> {
    return this.get(`/api/sessions/${encodeURIComponent(id)}/trials`);
  }

  movement(id: string, clipId: string): Promise<MovementDoc> {
    return this.get(`/api/sessions/${encodeURIComponent(id)}` +
                    `/movement/${encodeURIComponent(clipId)}`);
  }

  /** ids travel comma-joined, in the caller's order */
  performanceUrl(ids: string[]): string {
    return `/api/performance?ids=${ids.map(encodeURIComponent).join(",")}`;
  }

  performance(ids: string[]): Promise<SessionStats[]> {
    return this.get(this.performanceUrl(ids));
  }

  schemaConfig(): Promise<SchemaConfigDoc> {
    return this.get("/api/schema-config");
  }

  async putSchemaConfig(doc: SchemaConfigDoc): Promise<SchemaConfigDoc> {
    const resp = await fetch(this.base + "/api/schema-config", {
      method: "PUT",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(doc),
    });
    if (!resp.ok) throw await parseError(resp);
    return resp.json() as Promise<SchemaConfigDoc>;
  }
}
