/** Thin typed client for the clarification service HTTP API. */

import type {
  IntentsResponse,
  Metrics,
  ResolveResponse,
  SessionResponse,
} from './types.js';

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = 'ApiError';
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const response = await fetch(url, {
    headers: { 'Content-Type': 'application/json' },
    ...init,
  });
  if (!response.ok) {
    let detail = response.statusText;
    try {
      const body = (await response.json()) as { detail?: string };
      if (body.detail) detail = String(body.detail);
    } catch {
      // non-JSON error body; keep the status text
    }
    throw new ApiError(response.status, detail);
  }
  return (await response.json()) as T;
}

export class ServiceClient {
  constructor(private readonly baseUrl: string = '') {}

  startSession(query: string): Promise<SessionResponse> {
    return request<SessionResponse>(`${this.baseUrl}/v1/session`, {
      method: 'POST',
      body: JSON.stringify({ query }),
    });
  }

  selectLabel(sessionId: string, labelId: number | null): Promise<IntentsResponse> {
    return request<IntentsResponse>(`${this.baseUrl}/v1/session/${sessionId}/label`, {
      method: 'POST',
      body: JSON.stringify({ label_id: labelId }),
    });
  }

  resolve(sessionId: string, choice: number | 'transfer'): Promise<ResolveResponse> {
    const body = choice === 'transfer' ? { transfer: true } : { intent_id: choice };
    return request<ResolveResponse>(`${this.baseUrl}/v1/session/${sessionId}/resolve`, {
      method: 'POST',
      body: JSON.stringify(body),
    });
  }

  metrics(): Promise<Metrics> {
    return request<Metrics>(`${this.baseUrl}/v1/metrics`);
  }
}
