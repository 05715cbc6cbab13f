/**
 * Live event subscription with ordinal bookkeeping.
 *
 * The feed prefers the server-push stream and falls back to plain polling
 * (1 s period) when streaming is unavailable or dies.  Whatever the
 * transport, `accept()` is the single admission point: it drops ordinals
 * the console has already rendered (so reconnects never duplicate ticker
 * lines), reports gaps (so the console can refetch /state), and advances
 * the resume cursor.
 */

import { FeedEvent } from "./backend.js";
import { StreamCancel, Transport } from "./transport.js";

export type FeedMode = "stream" | "poll";

export interface FeedSink {
  /** Fresh events in ascending ordinal order, already deduplicated. */
  onEvents(batch: FeedEvent[]): void;
  /** Ordinal discontinuity: the console should refetch /state. */
  onGap(expected: number, got: number): void;
  /** The feed is alive but idle (empty poll or stream keepalive). */
  onHeartbeat(): void;
  /** Transport actually in use, reported once per (re)start. */
  onMode?(mode: FeedMode): void;
}

export const POLL_PERIOD_MS = 1_000;

export class EventFeed {
  /** Next ordinal to request; also the dedup watermark. */
  nextOrdinal = 0;
  mode: FeedMode | null = null;

  private cancelStream: StreamCancel | null = null;
  private pollTimer: ReturnType<typeof setInterval> | null = null;
  private stopped = false;

  constructor(
    private readonly transport: Transport,
    private readonly sink: FeedSink,
    private readonly pollPeriodMs: number = POLL_PERIOD_MS
  ) {}

  /**
   * Admit a batch from any transport.  Returns the events that were new.
   * Already-seen ordinals are dropped; a leading gap is reported but the
   * batch is still admitted so the feed converges instead of stalling.
   */
  accept(batch: FeedEvent[]): FeedEvent[] {
    const fresh = batch
      .filter((event) => event.ordinal >= this.nextOrdinal)
      .sort((a, b) => a.ordinal - b.ordinal)
      .filter((event, i, arr) => i === 0 || event.ordinal !== arr[i - 1].ordinal);
    if (fresh.length === 0) return [];
    if (fresh[0].ordinal > this.nextOrdinal) {
      this.sink.onGap(this.nextOrdinal, fresh[0].ordinal);
    }
    this.nextOrdinal = fresh[fresh.length - 1].ordinal + 1;
    this.sink.onEvents(fresh);
    return fresh;
  }

  /** One polling round-trip; used by the poll loop and directly by tests. */
  async pollOnce(): Promise<number> {
    const page = await this.transport.fetchEvents(this.nextOrdinal);
    const fresh = this.accept(page.events);
    if (fresh.length === 0) this.sink.onHeartbeat();
    return fresh.length;
  }

  /** Start delivering events: streaming if possible, else polling. */
  async start(): Promise<void> {
    this.stopped = false;
    if (this.transport.openStream !== undefined) {
      try {
        this.cancelStream = await this.transport.openStream(
          this.nextOrdinal,
          (event) => this.accept([event]),
          () => this.sink.onHeartbeat(),
          () => this.fallbackToPolling()
        );
        this.mode = "stream";
        this.sink.onMode?.("stream");
        return;
      } catch {
        // stream refused at establishment; poll instead
      }
    }
    this.startPolling();
  }

  private fallbackToPolling(): void {
    this.cancelStream = null;
    if (this.stopped || this.mode === "poll") return;
    this.startPolling();
  }

  private startPolling(): void {
    this.mode = "poll";
    this.sink.onMode?.("poll");
    this.pollTimer = setInterval(() => {
      void this.pollOnce().catch(() => this.sink.onHeartbeat());
    }, this.pollPeriodMs);
  }

  stop(): void {
    this.stopped = true;
    if (this.cancelStream !== null) {
      this.cancelStream();
      this.cancelStream = null;
    }
    if (this.pollTimer !== null) {
      clearInterval(this.pollTimer);
      this.pollTimer = null;
    }
  }
}
