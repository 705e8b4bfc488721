// Typed client for the campaign HTTP API. Every view in the console goes
// through these calls; nothing here computes probabilities.

export interface NoiseConfig {
  specificity: number | number[];
  sensitivity: number | number[];
}

export interface CampaignRequest {
  id: string;
  seed: number;
  n: number;
  k: number;
  n_max: number;
  q?: number;
  rates?: number[];
  noise?: NoiseConfig;
  policy?: { name: string; [key: string]: unknown };
  smc?: { num_particles?: number; target_ess?: number };
}

export interface PendingBatch {
  sequence: number;
  groups: number[][];
}

export interface CampaignView {
  id: string;
  status: "ready-to-propose" | "awaiting-results" | "exhausted";
  n: number;
  k: number;
  cycle: number;
  tests_performed: number;
  pending: PendingBatch | null;
  marginal: number[];
  ranking: number[];
  policy: { name: string };
}

export interface CampaignEvent {
  seq: number;
  kind: "created" | "proposed" | "observed";
  time: number;
  payload: Record<string, unknown>;
}

export class ApiError extends Error {
  status: number;
  constructor(status: number, message: string) {
    super(message);
    this.status = status;
  }
}

async function request<T>(base: string, path: string, init?: RequestInit): Promise<T> {
  const resp = await fetch(base + path, init);
  const body = await resp.json().catch(() => ({}));
  if (!resp.ok) {
    const message =
      typeof (body as { error?: unknown }).error === "string"
        ? (body as { error: string }).error
        : `request failed with status ${resp.status}`;
    throw new ApiError(resp.status, message);
  }
  return body as T;
}

function post(payload?: unknown): RequestInit {
  return {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: payload === undefined ? undefined : JSON.stringify(payload),
  };
}

export class CampaignApi {
  constructor(private base: string = "") {}

  listCampaigns(): Promise<string[]> {
    return request<{ campaigns: string[] }>(this.base, "/campaigns").then(
      (body) => body.campaigns,
    );
  }

  createCampaign(config: CampaignRequest): Promise<CampaignView> {
    return request(this.base, "/campaigns", post(config));
  }

  getCampaign(id: string): Promise<CampaignView> {
    return request(this.base, `/campaigns/${encodeURIComponent(id)}`);
  }

  propose(id: string): Promise<CampaignView> {
    return request(this.base, `/campaigns/${encodeURIComponent(id)}/proposal`, post());
  }

  submitResults(id: string, outcomes: number[], sequence: number): Promise<CampaignView> {
    return request(
      this.base,
      `/campaigns/${encodeURIComponent(id)}/results`,
      post({ outcomes, sequence }),
    );
  }

  getMarginal(id: string): Promise<{ id: string; cycle: number; marginal: number[] }> {
    return request(this.base, `/campaigns/${encodeURIComponent(id)}/marginal`);
  }

  getEvents(id: string): Promise<CampaignEvent[]> {
    return request<{ events: CampaignEvent[] }>(
      this.base,
      `/campaigns/${encodeURIComponent(id)}/events`,
    ).then((body) => body.events);
  }
}
