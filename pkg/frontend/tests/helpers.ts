/**
 * Shared test scaffolding: fixture loading and a scriptable transport.
 *
 * The JSON fixtures under tests/fixtures/ are verbatim captures of the
 * control API's documents from deterministic seed-42 runs, so unit tests
 * exercise the console against exactly what the server sends.
 */

import { readFileSync } from "node:fs";
import { EventsPage, FeedEvent, StateDocument } from "../src/backend.js";
import { CommandResponse, Transport } from "../src/transport.js";

export function loadFixture<T>(name: string): T {
  const url = new URL(`./fixtures/${name}`, import.meta.url);
  return JSON.parse(readFileSync(url, "utf-8")) as T;
}

export const fixtures = {
  as2Initial: (): StateDocument => loadFixture("as2_state_initial.json"),
  as2Alert: (): StateDocument => loadFixture("as2_state_alert.json"),
  as2End: (): StateDocument => loadFixture("as2_state_end.json"),
  as1End: (): StateDocument => loadFixture("as1_state_end.json"),
  as1Events: (): FeedEvent[] => loadFixture("as1_events.json"),
  as2AlertEvents: (): FeedEvent[] => loadFixture("as2_events_alert.json"),
};

export interface RecordedCommand {
  kind: string;
  params: Record<string, unknown>;
}

/**
 * In-memory Transport with scripted answers.  Tests push event pages and
 * command responses; every call is recorded for exactly-once assertions.
 */
export class FakeTransport implements Transport {
  state: StateDocument;
  /** Queue of event pages; the last one repeats once drained. */
  eventPages: FeedEvent[][] = [];
  commandResponses: CommandResponse[] = [];
  recordedCommands: RecordedCommand[] = [];
  stateFetches = 0;
  eventFetches: number[] = [];
  pausedCalls: boolean[] = [];
  /** When set, postCommand rejects with this error (network failure). */
  networkFailure: Error | null = null;

  constructor(state: StateDocument) {
    this.state = state;
  }

  async fetchState(): Promise<StateDocument> {
    this.stateFetches += 1;
    return structuredClone(this.state);
  }

  async fetchEvents(since: number): Promise<EventsPage> {
    this.eventFetches.push(since);
    const page = this.eventPages.length > 1 ? this.eventPages.shift()! : (this.eventPages[0] ?? []);
    return {
      events: structuredClone(page),
      next: since + page.length,
      paused: this.state.paused,
      finished: this.state.finished,
    };
  }

  async postCommand(kind: string, params: Record<string, unknown>): Promise<CommandResponse> {
    if (this.networkFailure !== null) throw this.networkFailure;
    this.recordedCommands.push({ kind, params: structuredClone(params) });
    if (this.commandResponses.length === 0) {
      throw new Error("FakeTransport: no scripted command response left");
    }
    return this.commandResponses.shift()!;
  }

  async setPaused(paused: boolean): Promise<void> {
    this.pausedCalls.push(paused);
    this.state = { ...this.state, paused };
  }
}

export function feedEvent(ordinal: number, kind = "STATION_DOCKED", subject = "weline01", detail = "T1-B01"): FeedEvent {
  return { ordinal, ts_us: 1_000_000 * (ordinal + 1), kind, subject, detail };
}
