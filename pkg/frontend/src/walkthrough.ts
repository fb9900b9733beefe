import type { RatingApi } from "./api.js";
import { createViewState, missingChannels, starsComplete } from "./state.js";
import type { ViewState } from "./state.js";
import { CHANNELS } from "./types.js";
import type { Channel, NextCase, SessionInfo } from "./types.js";

export type AdvanceResult =
  | { kind: "blocked"; message: string }
  | { kind: "case"; state: ViewState }
  | { kind: "done" };

/**
 * Drives one rater session: cases arrive in the server's blinded order
 * and a case can only be left once all three channels carry stars.
 */
export class Walkthrough {
  current: NextCase | null = null;
  readonly submitted: { key: string; channel: Channel; stars: number }[] = [];

  constructor(
    private api: RatingApi,
    readonly session: SessionInfo,
  ) {}

  async start(): Promise<AdvanceResult> {
    return this.fetchNext();
  }

  private async fetchNext(): Promise<AdvanceResult> {
    const next = await this.api.nextCase(this.session.session_id);
    if (next.done) {
      this.current = null;
      return { kind: "done" };
    }
    this.current = next;
    return { kind: "case", state: createViewState(next) };
  }

  /**
   * Submit the pending stars and move on.  Refuses to advance while any
   * channel is unrated; submissions are idempotent, so a retry after a
   * network failure cannot double-count.
   */
  async advance(state: ViewState): Promise<AdvanceResult> {
    if (!starsComplete(state)) {
      const missing = missingChannels(state).join(", ");
      return { kind: "blocked", message: `Rate ${missing} before moving to the next case.` };
    }
    for (const channel of CHANNELS) {
      const stars = state.pendingStars[channel]!;
      await this.submitWithRetry(state.key, channel, stars);
      this.submitted.push({ key: state.key, channel, stars });
    }
    return this.fetchNext();
  }

  private async submitWithRetry(key: string, channel: Channel, stars: number): Promise<void> {
    try {
      await this.api.submitRating(this.session.session_id, key, channel, stars);
    } catch (error) {
      if (error instanceof TypeError) {
        // fetch network failure; the rating POST is idempotent per
        // (rater, case, channel), so resubmitting is safe.
        await this.api.submitRating(this.session.session_id, key, channel, stars);
        return;
      }
      throw error;
    }
  }

  /** Per-channel mean of this rater's submitted stars (latest per case). */
  localMeans(): Record<Channel, number | null> {
    const latest = new Map<string, number>();
    for (const s of this.submitted) latest.set(`${s.key}:${s.channel}`, s.stars);
    const result = { T2H: null, ET: null, CC: null } as Record<Channel, number | null>;
    for (const channel of CHANNELS) {
      const values: number[] = [];
      latest.forEach((stars, mapKey) => {
        if (mapKey.endsWith(`:${channel}`)) values.push(stars);
      });
      if (values.length) {
        result[channel] = values.reduce((a, b) => a + b, 0) / values.length;
      }
    }
    return result;
  }
}
