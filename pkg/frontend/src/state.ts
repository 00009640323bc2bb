// Client-side session state machine. Mirrors the server statuses exactly;
// a preference can only ever be sent while a pending pair is held, and the
// pair is dropped the moment an answer is accepted.

import {
  ApiError,
  PendingPair,
  PreferenceReply,
  SessionClient,
  SessionInfo,
} from "./api.js";

export type Phase =
  | "collecting_anchors"
  | "awaiting_duel"
  | "choosing"
  | "submitting"
  | "retry_offered"
  | "closed";

export interface HistoryEntry {
  pair: PendingPair;
  winner: "challenger" | "reference";
  reply: PreferenceReply;
}

export class SessionController {
  phase: Phase = "collecting_anchors";
  info: SessionInfo | null = null;
  pending: PendingPair | null = null;
  selection: "challenger" | "reference" | null = null;
  history: HistoryEntry[] = [];
  lastError: string | null = null;

  constructor(
    readonly client: SessionClient,
    readonly sessionId: string,
  ) {}

  async refresh(): Promise<void> {
    this.info = await this.client.getSession(this.sessionId);
    if (this.info.status === "closed") {
      this.phase = "closed";
      this.pending = null;
    } else if (this.info.status === "collecting_anchors") {
      this.phase = "collecting_anchors";
    } else if (this.info.pending) {
      this.pending = this.info.pending;
      if (this.phase !== "submitting" && this.phase !== "retry_offered") {
        this.phase = "choosing";
      }
    } else if (this.phase !== "awaiting_duel") {
      this.phase = "awaiting_duel";
      this.pending = null;
    }
  }

  async addAnchors(points: number[][]): Promise<{ n: number; bandwidth: number | null }> {
    if (this.phase !== "collecting_anchors") {
      throw new Error("anchors are frozen");
    }
    const reply = await this.client.submitAnchors(this.sessionId, points);
    if (this.info) {
      this.info.n_anchors = reply.n;
      this.info.bandwidth = reply.bandwidth;
    }
    return reply;
  }

  async freeze(): Promise<void> {
    if (this.phase !== "collecting_anchors") return;
    this.info = await this.client.freeze(this.sessionId);
    this.phase = "awaiting_duel";
  }

  async requestDuel(): Promise<PendingPair> {
    if (this.phase !== "awaiting_duel") {
      throw new Error(`cannot request a duel while ${this.phase}`);
    }
    const duel = await this.client.nextDuel(this.sessionId);
    this.pending = { challenger: duel.challenger, reference: duel.reference };
    this.selection = null;
    this.phase = "choosing";
    return this.pending;
  }

  /** Submit the human's choice. On a network/server failure the selection is
   *  preserved and exactly one resubmit is offered. */
  async choose(winner: "challenger" | "reference"): Promise<PreferenceReply> {
    if (this.phase !== "choosing" && this.phase !== "retry_offered") {
      throw new Error("no pending pair to answer");
    }
    if (!this.pending) {
      throw new Error("no pending pair to answer");
    }
    const pair = this.pending;
    this.selection = winner;
    this.phase = "submitting";
    try {
      const reply = await this.client.submitPreference(this.sessionId, winner);
      this.history.push({ pair, winner, reply });
      this.pending = null;
      this.selection = null;
      this.phase = "awaiting_duel";
      this.lastError = null;
      return reply;
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        // the server already recorded this answer; drop the stale pair
        this.pending = null;
        this.selection = null;
        this.phase = "awaiting_duel";
        throw err;
      }
      this.lastError = err instanceof Error ? err.message : String(err);
      if (this.phase === "submitting") {
        this.phase = "retry_offered";
      }
      throw err;
    }
  }

  get canRetry(): boolean {
    return this.phase === "retry_offered" && this.selection !== null;
  }

  async retry(): Promise<PreferenceReply> {
    if (!this.canRetry || !this.selection) {
      throw new Error("nothing to retry");
    }
    return this.choose(this.selection);
  }
}
