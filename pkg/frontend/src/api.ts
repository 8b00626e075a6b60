import type { AnnotationFragment, MqlaReport, Session } from "./types.js";

/** The slice of the service the audit views depend on. */
export interface AuditApi {
  getSession(id: string): Promise<Session>;
  putAnnotations(id: string, fragment: AnnotationFragment): Promise<number>;
  getReport(id: string): Promise<MqlaReport>;
}

export class ApiError extends Error {
  constructor(
    message: string,
    public readonly status: number,
    public readonly violations: string[] = [],
  ) {
    super(message);
  }
}

/** 409 from a stale annotation write; carries the server's version. */
export class ConflictError extends ApiError {
  constructor(public readonly currentVersion: number) {
    super("annotation version conflict", 409);
  }
}

async function parseError(response: Response): Promise<ApiError> {
  let body: { error?: string; violations?: string[]; current_version?: number } = {};
  try {
    body = await response.json();
  } catch {
    // non-JSON error body; fall through to the generic message
  }
  if (response.status === 409 && typeof body.current_version === "number") {
    return new ConflictError(body.current_version);
  }
  return new ApiError(body.error ?? `request failed (${response.status})`,
    response.status, body.violations ?? []);
}

export class ApiClient implements AuditApi {
  constructor(
    private readonly baseUrl = "",
    private readonly fetchImpl: typeof fetch = fetch,
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, {
      headers: { "Content-Type": "application/json" },
      ...init,
    });
    if (!response.ok) {
      throw await parseError(response);
    }
    return (await response.json()) as T;
  }

  getSession(id: string): Promise<Session> {
    return this.request(`/v1/sessions/${id}`);
  }

  /** Persist one annotation fragment; resolves to the new session version. */
  async putAnnotations(id: string, fragment: AnnotationFragment): Promise<number> {
    const result = await this.request<{ version: number }>(
      `/v1/sessions/${id}/annotations`,
      { method: "PUT", body: JSON.stringify(fragment) },
    );
    return result.version;
  }

  getReport(id: string): Promise<MqlaReport> {
    return this.request(`/v1/sessions/${id}/report`);
  }

  createSession(bundle: unknown): Promise<{ id: string; version: number }> {
    return this.request(`/v1/sessions`, {
      method: "POST",
      body: JSON.stringify({ bundle }),
    });
  }

  async exportRecords(): Promise<string> {
    const response = await this.fetchImpl(`${this.baseUrl}/v1/export`);
    if (!response.ok) {
      throw await parseError(response);
    }
    return response.text();
  }
}
