/**
 * Review flow state machine, independent of the DOM.
 *
 * One card is active at a time. A decision posts the verdict through the
 * outbound queue and optimistically advances to the next card; one-step
 * undo re-presents the previous card so a fresh decision supersedes the
 * earlier verdict on the server. Progress counts always come from server
 * payloads, never client arithmetic.
 */

import type { Decision, Progress, ReviewCard } from "./api.js";
import { ApiError, isExhausted, ReviewApi } from "./api.js";
import { VerdictQueue } from "./queue.js";

export type ViewState =
  | { kind: "idle" }
  | { kind: "loading" }
  | { kind: "card"; card: ReviewCard; undone: boolean }
  | { kind: "done"; progress: Progress }
  | { kind: "error"; message: string };

export interface ControllerEvents {
  onState?: (state: ViewState) => void;
  onProgress?: (progress: Progress) => void;
  onBanner?: (message: string | null) => void;
}

export class ReviewController {
  private state: ViewState = { kind: "idle" };
  private lastCard: ReviewCard | null = null;
  private readonly queue: VerdictQueue;

  constructor(
    private readonly api: ReviewApi,
    private readonly annotator: string,
    private readonly events: ControllerEvents = {},
    retryDelayMs = 800,
  ) {
    this.queue = new VerdictQueue(
      api,
      {
        onBlocked: () => this.events.onBanner?.("verdict not delivered yet, retrying"),
        onRecovered: () => {
          this.events.onBanner?.(null);
          void this.refreshProgress();
          void this.recoverView();
        },
        onAcknowledged: () => void this.refreshProgress(),
      },
      retryDelayMs,
    );
  }

  get view(): ViewState {
    return this.state;
  }

  get blocked(): boolean {
    return this.queue.blocked;
  }

  /** Resolves when every submitted verdict has been acknowledged. */
  settled(): Promise<void> {
    return this.queue.idle();
  }

  private setState(state: ViewState): void {
    this.state = state;
    this.events.onState?.(state);
    if (state.kind === "card") {
      this.events.onProgress?.(state.card.progress);
    } else if (state.kind === "done") {
      this.events.onProgress?.(state.progress);
    }
  }

  private async refreshProgress(): Promise<void> {
    try {
      this.events.onProgress?.(await this.api.fetchProgress());
    } catch {
      // banner handling belongs to the queue; progress refresh is best-effort
    }
  }

  /** After delivery recovers, leave any already-decided card behind. */
  private async recoverView(): Promise<void> {
    if (this.state.kind === "card" && !this.state.undone && this.state.card === this.lastCard) {
      await this.advance();
    }
  }

  async start(): Promise<void> {
    await this.advance();
  }

  private async advance(): Promise<void> {
    this.setState({ kind: "loading" });
    let payload;
    try {
      payload = await this.api.fetchNext(this.annotator);
    } catch (err) {
      const message = err instanceof ApiError ? err.message : String(err);
      this.events.onBanner?.(`cannot reach the review service (${message})`);
      if (this.lastCard !== null) {
        // keep showing the previous card; nothing is lost
        this.setState({ kind: "card", card: this.lastCard, undone: false });
      } else {
        this.setState({ kind: "error", message });
      }
      return;
    }
    this.events.onBanner?.(null);
    if (isExhausted(payload)) {
      this.setState({ kind: "done", progress: payload.progress });
    } else {
      this.setState({ kind: "card", card: payload, undone: false });
    }
  }

  /** Decide the current card; no-op while loading or while delivery is blocked. */
  async decide(decision: Decision): Promise<void> {
    if (this.state.kind !== "card" || this.queue.blocked) {
      return;
    }
    const card = this.state.card;
    this.queue.push({
      image_id: card.image_id,
      anomaly_index: card.anomaly_index,
      decision,
      annotator_id: this.annotator,
    });
    this.lastCard = card;
    await this.advance();
  }

  /** One-step undo: re-present the last decided card for a superseding verdict. */
  undo(): void {
    if (this.lastCard === null || this.queue.blocked) {
      return;
    }
    if (this.state.kind !== "card" && this.state.kind !== "done") {
      return;
    }
    const card = this.lastCard;
    this.lastCard = null;
    this.setState({ kind: "card", card, undone: true });
  }

  retryDelivery(): void {
    this.queue.retryNow();
  }

  /** Keyboard entry point: A/R/U decide, Z undoes. */
  async handleKey(key: string): Promise<void> {
    const mapping: Record<string, Decision> = {
      a: "accept",
      r: "reject",
      u: "unsure",
    };
    const lower = key.toLowerCase();
    const decision = mapping[lower];
    if (decision !== undefined) {
      await this.decide(decision);
    } else if (lower === "z") {
      this.undo();
    }
  }
}
