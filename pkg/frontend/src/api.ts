// Thin JSON client over the service's HTTP API. Every method maps to one
// endpoint; errors carry the service's code and any validation detail.

import type {
  CampaignDetail,
  CampaignSummary,
  CompletedRecord,
  NextBatch,
  Progress,
  SavePayload,
  Violation,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
    readonly violations: Violation[] = [],
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export class Api {
  constructor(
    private readonly base: string = "",
    private readonly fetchFn?: typeof fetch,
  ) {}

  listCampaigns(): Promise<CampaignSummary[]> {
    return this.request("GET", "/api/campaigns") as Promise<CampaignSummary[]>;
  }

  campaign(campaignId: string): Promise<CampaignDetail> {
    return this.request("GET", `/api/campaigns/${campaignId}`) as Promise<CampaignDetail>;
  }

  progress(campaignId: string): Promise<Progress> {
    return this.request("GET", `/api/campaigns/${campaignId}/progress`) as Promise<Progress>;
  }

  records(campaignId: string): Promise<CompletedRecord[]> {
    return this.request("GET", `/api/campaigns/${campaignId}/records`) as Promise<CompletedRecord[]>;
  }

  /** Claim the next batch; null when the campaign has no work for this annotator. */
  nextBatch(campaignId: string, annotator: string): Promise<NextBatch | null> {
    const query = `annotator=${encodeURIComponent(annotator)}`;
    return this.request("POST", `/api/campaigns/${campaignId}/next?${query}`) as Promise<NextBatch | null>;
  }

  saveBatch(campaignId: string, payload: SavePayload): Promise<{ completion_code: string }> {
    return this.request("POST", `/api/campaigns/${campaignId}/save`, payload) as Promise<{
      completion_code: string;
    }>;
  }

  private async request(method: string, path: string, body?: unknown): Promise<unknown> {
    const doFetch = this.fetchFn ?? globalThis.fetch;
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { "content-type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const response = await doFetch(`${this.base}${path}`, init);
    if (response.status === 204) return null;
    let parsed: unknown = null;
    try {
      parsed = await response.json();
    } catch {
      parsed = null;
    }
    if (!response.ok) {
      const detail = (parsed ?? {}) as { code?: string; message?: string; violations?: Violation[] };
      throw new ApiError(
        response.status,
        detail.code ?? "HTTP_ERROR",
        detail.message ?? `request failed with status ${response.status}`,
        detail.violations ?? [],
      );
    }
    return parsed;
  }
}
