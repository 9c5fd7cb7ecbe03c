/**
 * Outbound verdict queue: FIFO, at-least-once delivery with retry.
 *
 * Sends never reorder; a failed send leaves the verdict at the head and
 * flips the queue into a blocked state until a retry succeeds. Combined
 * with server-side supersession this gives effectively-once semantics.
 */

import type { ReviewApi, VerdictPayload } from "./api.js";

export interface QueueEvents {
  onBlocked?: (error: unknown) => void;
  onRecovered?: () => void;
  onAcknowledged?: (verdict: VerdictPayload) => void;
}

export class VerdictQueue {
  private readonly pending: VerdictPayload[] = [];
  private flushing = false;
  private failed = false;
  private drainWaiters: Array<() => void> = [];

  constructor(
    private readonly api: ReviewApi,
    private readonly events: QueueEvents = {},
    private readonly retryDelayMs = 800,
  ) {}

  get blocked(): boolean {
    return this.failed;
  }

  get size(): number {
    return this.pending.length;
  }

  push(verdict: VerdictPayload): void {
    this.pending.push(verdict);
    void this.flush();
  }

  /** Resolves once every queued verdict has been acknowledged. */
  idle(): Promise<void> {
    if (this.pending.length === 0 && !this.flushing) {
      return Promise.resolve();
    }
    return new Promise((resolve) => this.drainWaiters.push(resolve));
  }

  /** Manual retry hook for the banner button. */
  retryNow(): void {
    void this.flush(true);
  }

  private async flush(manual = false): Promise<void> {
    if (this.flushing) return;
    if (this.failed && !manual) return;
    this.flushing = true;
    try {
      while (this.pending.length > 0) {
        const head = this.pending[0]!;
        try {
          await this.api.submitVerdict(head);
        } catch (err) {
          if (!this.failed) {
            this.failed = true;
            this.events.onBlocked?.(err);
          }
          setTimeout(() => void this.flush(true), this.retryDelayMs);
          return;
        }
        this.pending.shift();
        if (this.failed) {
          this.failed = false;
          this.events.onRecovered?.();
        }
        this.events.onAcknowledged?.(head);
      }
    } finally {
      this.flushing = false;
      if (this.pending.length === 0) {
        const waiters = this.drainWaiters;
        this.drainWaiters = [];
        for (const resolve of waiters) resolve();
      }
    }
  }
}
