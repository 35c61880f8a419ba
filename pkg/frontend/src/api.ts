// Typed client for the annotation service HTTP API. Document shapes mirror
// the service's JSON exactly; nothing is derived or renamed here.

export interface BatchItem {
  id: number;
  features: number[];
  display?: string;
}

export interface BatchDoc {
  session_id: string;
  status: "active" | "done";
  batch: BatchItem[];
  round: number | null;
  phase: string | null;
  class_id: number | null;
  num_classes: number;
}

export interface StateDoc {
  session_id: string;
  status: "active" | "done";
  strategy: string;
  round: number | null;
  rounds_total: number;
  rounds_completed: number;
  phase: string | null;
  class_id: number | null;
  num_classes: number;
  labeled_total: number;
  target_total: number;
  pending_count: number;
  class_counts: number[];
  minority_class: number;
  minority_fraction: number;
  j_hat: Record<string, number>;
}

export interface CreateResponse {
  session_id: string;
  state: StateDoc;
}

export interface LabelEntry {
  id: number;
  label: number;
}

/** Error envelope from the service: {"code": ..., "error": ...}. */
export class ApiError extends Error {
  constructor(
    public readonly code: string,
    message: string,
    public readonly status: number,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

async function parseError(response: Response): Promise<ApiError> {
  let code = "unknown_error";
  let message = `HTTP ${response.status}`;
  try {
    const body = await response.json();
    if (typeof body.code === "string") code = body.code;
    if (typeof body.error === "string") message = body.error;
  } catch {
    // non-JSON error body: keep the HTTP status message
  }
  return new ApiError(code, message, response.status);
}

export class Client {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(this.baseUrl + path, init);
    if (!response.ok) throw await parseError(response);
    return (await response.json()) as T;
  }

  createSession(config: object, idempotencyToken?: string): Promise<CreateResponse> {
    const payload: Record<string, unknown> = { ...config };
    if (idempotencyToken !== undefined) payload.idempotency_token = idempotencyToken;
    return this.request<CreateResponse>("/sessions", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(payload),
    });
  }

  getState(sessionId: string): Promise<StateDoc> {
    return this.request<StateDoc>(`/sessions/${sessionId}/state`);
  }

  getBatch(sessionId: string): Promise<BatchDoc> {
    return this.request<BatchDoc>(`/sessions/${sessionId}/batch`);
  }

  submitLabels(
    sessionId: string,
    labels: LabelEntry[],
    annotator: string,
  ): Promise<StateDoc> {
    return this.request<StateDoc>(`/sessions/${sessionId}/labels`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ labels, annotator }),
    });
  }

  /** Download URL for the session's experiment log CSV. */
  logUrl(sessionId: string): string {
    return `${this.baseUrl}/sessions/${sessionId}/log`;
  }
}
