// Typed client for the live-session HTTP API. The server is the source of
// truth: one request in flight per session, no optimistic state.

export interface SessionInfo {
  id: string;
  status: "collecting_anchors" | "active" | "closed";
  lower: number[];
  upper: number[];
  a: number;
  n_anchors: number;
  bandwidth: number | null;
  n_duels: number;
  pending: PendingPair | null;
}

export interface PendingPair {
  challenger: number[];
  reference: number[];
}

export interface AnchorsReply {
  n: number;
  bandwidth: number | null;
}

export interface PreferenceReply {
  n_duels: number;
  winner: number[];
  incumbent: number[] | null;
  incumbent_mean: number | null;
  mu_challenger: number;
  mu_reference: number;
  sigma2_challenger: number;
  sigma2_reference: number;
}

export interface SummaryRow {
  x: number[];
  mu_f: number;
  sigma_f: number;
  sigma2_eps: number;
  acq: number;
}

export interface SummaryReply {
  rows: SummaryRow[];
  incumbent: number[] | null;
  incumbent_mean: number | null;
  pending: PendingPair | null;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
  }
}

export class SessionClient {
  private inFlight = false;

  constructor(
    readonly baseUrl: string,
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  get busy(): boolean {
    return this.inFlight;
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    if (this.inFlight) {
      throw new ApiError(0, "busy", "another request is already in flight");
    }
    this.inFlight = true;
    try {
      const res = await this.fetchFn(`${this.baseUrl}${path}`, init);
      const text = await res.text();
      const body = text ? JSON.parse(text) : {};
      if (!res.ok) {
        throw new ApiError(
          res.status,
          body.code ?? "error",
          body.message ?? res.statusText,
        );
      }
      return body as T;
    } finally {
      this.inFlight = false;
    }
  }

  private post<T>(path: string, payload: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(payload),
    });
  }

  createSession(body: {
    lower: number[];
    upper: number[];
    a: number;
    acq_kind?: string;
    gamma?: number;
    eta?: number;
    pool_per_dim?: number;
    seed?: number;
  }): Promise<SessionInfo> {
    return this.post<SessionInfo>("/sessions", body);
  }

  getSession(id: string): Promise<SessionInfo> {
    return this.request<SessionInfo>(`/sessions/${id}`);
  }

  submitAnchors(id: string, points: number[][]): Promise<AnchorsReply> {
    return this.post<AnchorsReply>(`/sessions/${id}/anchors`, { points });
  }

  freeze(id: string): Promise<SessionInfo> {
    return this.post<SessionInfo>(`/sessions/${id}/freeze`, {});
  }

  nextDuel(id: string): Promise<PendingPair & { n_duels: number }> {
    return this.request(`/sessions/${id}/duel`);
  }

  submitPreference(
    id: string,
    winner: "challenger" | "reference",
  ): Promise<PreferenceReply> {
    return this.post<PreferenceReply>(`/sessions/${id}/preference`, { winner });
  }

  summary(id: string, grid: number): Promise<SummaryReply> {
    return this.request<SummaryReply>(`/sessions/${id}/summary?grid=${grid}`);
  }

  trace(id: string): Promise<string> {
    return this.fetchFn(`${this.baseUrl}/sessions/${id}/trace`).then((r) =>
      r.text(),
    );
  }
}
