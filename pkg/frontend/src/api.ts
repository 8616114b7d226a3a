import type { AccuracyPoint, Alert, Deployment, SuspectReport } from "./types.js";

// fetch is injectable so tests can drive the client against a stub
export type HttpFn = (input: string, init?: RequestInit) => Promise<Response>;

export interface ActionResult {
  ok: boolean;
  status: number;
  body: Deployment | null;
  reason: string | null;
}

export class ApiClient {
  private readonly baseUrl: string;
  private readonly http: HttpFn;

  constructor(baseUrl: string, http?: HttpFn) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
    this.http = http ?? ((input, init) => fetch(input, init));
  }

  private async getJson<T>(path: string): Promise<T> {
    const response = await this.http(this.baseUrl + path);
    if (!response.ok) {
      throw new Error(`GET ${path} failed with ${response.status}`);
    }
    return (await response.json()) as T;
  }

  health(): Promise<{ status: string }> {
    return this.getJson("/health");
  }

  alerts(sinceTick?: number): Promise<Alert[]> {
    const query = sinceTick === undefined ? "" : `?since_tick=${sinceTick}`;
    return this.getJson(`/alerts${query}`);
  }

  deployments(): Promise<Deployment[]> {
    return this.getJson("/deployments");
  }

  deployment(id: string): Promise<Deployment> {
    return this.getJson(`/deployments/${encodeURIComponent(id)}`);
  }

  accuracy(fromTick?: number, toTick?: number): Promise<AccuracyPoint[]> {
    const params = new URLSearchParams();
    if (fromTick !== undefined) params.set("from", String(fromTick));
    if (toTick !== undefined) params.set("to", String(toTick));
    const query = params.toString();
    return this.getJson(`/metrics/accuracy${query ? `?${query}` : ""}`);
  }

  // null means the server has no diagnosis for this alert (404), which the
  // console shows as an empty state rather than an error
  async diagnosis(alertId: string): Promise<SuspectReport | null> {
    const response = await this.http(
      this.baseUrl + `/diagnosis/${encodeURIComponent(alertId)}`,
    );
    if (response.status === 404) return null;
    if (!response.ok) {
      throw new Error(`GET /diagnosis/${alertId} failed with ${response.status}`);
    }
    return (await response.json()) as SuspectReport;
  }

  async act(
    id: string,
    verdict: "rollback" | "promote",
    actor: string,
  ): Promise<ActionResult> {
    const response = await this.http(
      this.baseUrl + `/deployments/${encodeURIComponent(id)}/${verdict}`,
      {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({ actor }),
      },
    );
    let body: unknown = null;
    try {
      body = await response.json();
    } catch {
      body = null;
    }
    if (response.ok) {
      return { ok: true, status: response.status, body: body as Deployment, reason: null };
    }
    const detail =
      body && typeof body === "object" && "detail" in body
        ? String((body as { detail: unknown }).detail)
        : `HTTP ${response.status}`;
    return { ok: false, status: response.status, body: null, reason: detail };
  }
}
