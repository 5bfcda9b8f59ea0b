/**
 * Typed client for the /v1 generation service.  At most one generation is
 * in flight per session: a monotonically increasing request token discards
 * stale responses if the user resubmits before the previous answer lands.
 */

import type { GenerationRequest, GenerationResult } from "./types.js";

export interface HealthInfo {
  status: "ok" | "degraded";
  model_version: string;
  uptime_seconds: number;
}

export class ServiceError extends Error {
  constructor(public status: number, public reasons: string[]) {
    super(reasons.join("; ") || `service error ${status}`);
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class GenerationClient {
  private token = 0;

  constructor(private baseUrl: string,
              private fetchImpl: FetchLike = fetch.bind(globalThis)) {}

  async health(): Promise<HealthInfo> {
    const res = await this.fetchImpl(`${this.baseUrl}/v1/health`);
    if (!res.ok) throw new ServiceError(res.status, ["health check failed"]);
    return (await res.json()) as HealthInfo;
  }

  /**
   * POST /v1/generate.  Resolves to null when a newer request superseded
   * this one (the stale response is discarded, never rendered).
   */
  async generate(request: GenerationRequest): Promise<GenerationResult | null> {
    const myToken = ++this.token;
    const res = await this.fetchImpl(`${this.baseUrl}/v1/generate`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(request),
    });
    if (myToken !== this.token) return null; // superseded while in flight
    if (!res.ok) {
      let reasons: string[] = [`HTTP ${res.status}`];
      try {
        const body = await res.json();
        if (Array.isArray(body?.reasons)) reasons = body.reasons;
      } catch {
        // body was not JSON; keep the status line
      }
      throw new ServiceError(res.status, reasons);
    }
    return (await res.json()) as GenerationResult;
  }
}
