/**
 * HTTP access to the control API.
 *
 * `HttpTransport` is the only place the console touches the network; it
 * speaks the documented /state, /events and /command contracts plus the
 * /pause and /resume pacing toggles.  The fetch implementation is
 * injectable so tests can script every exchange.
 */

import { CommandKind, EventsPage, FeedEvent, StateDocument } from "./backend.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export interface CommandResponse {
  status: number;
  body: Record<string, unknown>;
}

/** Cancels an open server-push stream. */
export type StreamCancel = () => void;

export interface Transport {
  fetchState(): Promise<StateDocument>;
  fetchEvents(since: number): Promise<EventsPage>;
  postCommand(kind: CommandKind | string, params: Record<string, unknown>): Promise<CommandResponse>;
  setPaused(paused: boolean): Promise<void>;
  /**
   * Open a server-push event stream from `since`.  Resolves once the
   * stream is established; `onEvent` fires per event, `onKeepalive` per
   * idle heartbeat, `onClose` when the stream dies after establishment.
   * Absent or rejecting implementations make the feed fall back to polling.
   */
  openStream?(
    since: number,
    onEvent: (event: FeedEvent) => void,
    onKeepalive: () => void,
    onClose: (reason: unknown) => void
  ): Promise<StreamCancel>;
}

export class HttpTransport implements Transport {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init)
  ) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
  }

  private async json(path: string, init?: RequestInit): Promise<Response> {
    return this.fetchImpl(`${this.baseUrl}${path}`, init);
  }

  async fetchState(): Promise<StateDocument> {
    const res = await this.json("/state");
    if (!res.ok) throw new Error(`GET /state failed: ${res.status}`);
    return (await res.json()) as StateDocument;
  }

  async fetchEvents(since: number): Promise<EventsPage> {
    const res = await this.json(`/events?since=${since}`);
    if (!res.ok) throw new Error(`GET /events failed: ${res.status}`);
    return (await res.json()) as EventsPage;
  }

  async postCommand(kind: string, params: Record<string, unknown>): Promise<CommandResponse> {
    const res = await this.json("/command", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ kind, params }),
    });
    const body = (await res.json()) as Record<string, unknown>;
    return { status: res.status, body };
  }

  async setPaused(paused: boolean): Promise<void> {
    const res = await this.json(paused ? "/pause" : "/resume", { method: "POST" });
    if (!res.ok) throw new Error(`pacing toggle failed: ${res.status}`);
  }

  async openStream(
    since: number,
    onEvent: (event: FeedEvent) => void,
    onKeepalive: () => void,
    onClose: (reason: unknown) => void
  ): Promise<StreamCancel> {
    const res = await this.json(`/events?since=${since}`, {
      headers: { Accept: "text/event-stream" },
    });
    if (!res.ok || res.body === null) {
      throw new Error(`stream unavailable: ${res.status}`);
    }
    const reader = res.body.getReader();
    const decoder = new TextDecoder();
    let cancelled = false;
    let buffer = "";
    void (async () => {
      try {
        for (;;) {
          const { done, value } = await reader.read();
          if (done || cancelled) break;
          buffer += decoder.decode(value, { stream: true });
          let cut;
          while ((cut = buffer.indexOf("\n\n")) >= 0) {
            const frame = buffer.slice(0, cut);
            buffer = buffer.slice(cut + 2);
            if (frame.startsWith(":")) {
              onKeepalive();
              continue;
            }
            const dataLine = frame.split("\n").find((line) => line.startsWith("data:"));
            if (dataLine !== undefined) {
              onEvent(JSON.parse(dataLine.slice(5).trim()) as FeedEvent);
            }
          }
        }
        if (!cancelled) onClose(new Error("stream ended"));
      } catch (reason) {
        if (!cancelled) onClose(reason);
      }
    })();
    return () => {
      cancelled = true;
      void reader.cancel().catch(() => undefined);
    };
  }
}
