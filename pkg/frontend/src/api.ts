import type {
  Axis,
  Channel,
  NextResponse,
  RatingAck,
  ScaleEntry,
  SessionInfo,
  Summary,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

/** Thin typed client over the rating-service HTTP API. */
export class RatingApi {
  constructor(
    private baseUrl: string,
    private token: string,
  ) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
  }

  private headers(): Record<string, string> {
    return { Authorization: `Bearer ${this.token}` };
  }

  private async request<T>(path: string, init: RequestInit = {}): Promise<T> {
    const response = await fetch(this.baseUrl + path, {
      ...init,
      headers: { ...this.headers(), ...(init.headers ?? {}) },
    });
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const body = (await response.json()) as { detail?: unknown };
        if (body.detail !== undefined) detail = JSON.stringify(body.detail);
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(response.status, detail);
    }
    return (await response.json()) as T;
  }

  getScale(): Promise<ScaleEntry[]> {
    return this.request<ScaleEntry[]>("/scale");
  }

  createSession(raterId: string, seed: number): Promise<SessionInfo> {
    return this.request<SessionInfo>("/sessions", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ rater_id: raterId, seed }),
    });
  }

  nextCase(sessionId: string): Promise<NextResponse> {
    return this.request<NextResponse>(`/sessions/${sessionId}/next`);
  }

  sliceUrl(key: string, seq: string, axis: Axis, index: number, overlays: readonly Channel[]): string {
    const params = new URLSearchParams({
      seq,
      axis,
      i: String(index),
      overlay: overlays.join(","),
    });
    return `${this.baseUrl}/cases/${key}/slice?${params.toString()}`;
  }

  /** Slices need the auth header, so they are fetched, not <img src>-ed. */
  async fetchSlice(
    key: string,
    seq: string,
    axis: Axis,
    index: number,
    overlays: readonly Channel[],
  ): Promise<ArrayBuffer> {
    const response = await fetch(this.sliceUrl(key, seq, axis, index, overlays), {
      headers: this.headers(),
    });
    if (!response.ok) throw new ApiError(response.status, response.statusText);
    return response.arrayBuffer();
  }

  submitRating(sessionId: string, key: string, channel: Channel, stars: number): Promise<RatingAck> {
    return this.request<RatingAck>("/ratings", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ session_id: sessionId, key, channel, stars }),
    });
  }

  finalize(sessionId: string): Promise<{ session_id: string; finalized: boolean }> {
    return this.request(`/sessions/${sessionId}/finalize`, { method: "POST" });
  }

  getSummary(finalized = false): Promise<Summary> {
    return this.request<Summary>(`/summary${finalized ? "?finalized=true" : ""}`);
  }
}
