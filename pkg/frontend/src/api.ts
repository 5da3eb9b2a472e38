import type {
  Answer,
  PoliciesPayload,
  PolicyPayload,
  SessionCreatedPayload,
  SessionPayload,
} from "./types.js";

export class GatewayError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "GatewayError";
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** Thin typed client over the gateway HTTP API; payloads pass through verbatim. */
export class GatewayClient {
  private readonly fetchImpl: FetchLike;

  constructor(
    private readonly baseUrl: string = "",
    fetchImpl?: FetchLike,
  ) {
    this.fetchImpl = fetchImpl ?? ((input, init) => fetch(input, init));
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(this.baseUrl + path, init);
    let body: unknown = null;
    try {
      body = await response.json();
    } catch {
      body = null;
    }
    if (!response.ok) {
      const error = (body ?? {}) as { code?: string; message?: string };
      throw new GatewayError(
        response.status,
        error.code ?? "http_error",
        error.message ?? `request failed with status ${response.status}`,
      );
    }
    return body as T;
  }

  listPolicies(): Promise<PoliciesPayload> {
    return this.request<PoliciesPayload>("/policies");
  }

  getPolicy(policyId: string): Promise<PolicyPayload> {
    return this.request<PolicyPayload>(`/policies/${encodeURIComponent(policyId)}`);
  }

  createSession(policyId: string, strategy = "order"): Promise<SessionCreatedPayload> {
    return this.request<SessionCreatedPayload>("/sessions", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ policy_id: policyId, strategy }),
    });
  }

  getSession(sessionId: string): Promise<SessionPayload> {
    return this.request<SessionPayload>(`/sessions/${encodeURIComponent(sessionId)}`);
  }

  answer(sessionId: string, questionId: string, answer: Answer): Promise<SessionPayload> {
    return this.request<SessionPayload>(
      `/sessions/${encodeURIComponent(sessionId)}/answer`,
      {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ question_id: questionId, answer }),
      },
    );
  }
}
