import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { FeedEvent } from "../src/backend.js";
import { EventFeed, FeedMode, FeedSink } from "../src/feed.js";
import { StreamCancel, Transport } from "../src/transport.js";
import { FakeTransport, feedEvent, fixtures } from "./helpers.js";

interface SinkLog {
  delivered: FeedEvent[];
  gaps: Array<[number, number]>;
  heartbeats: number;
  modes: FeedMode[];
}

function recordingSink(): { sink: FeedSink; log: SinkLog } {
  const log: SinkLog = { delivered: [], gaps: [], heartbeats: 0, modes: [] };
  return {
    log,
    sink: {
      onEvents: (batch) => log.delivered.push(...batch),
      onGap: (expected, got) => log.gaps.push([expected, got]),
      onHeartbeat: () => (log.heartbeats += 1),
      onMode: (mode) => log.modes.push(mode),
    },
  };
}

describe("ordinal admission (accept)", () => {
  it("delivers fresh events and advances the cursor", () => {
    const { sink, log } = recordingSink();
    const feed = new EventFeed(new FakeTransport(fixtures.as2Initial()), sink);
    feed.accept([feedEvent(0), feedEvent(1), feedEvent(2)]);
    expect(log.delivered.map((e) => e.ordinal)).toEqual([0, 1, 2]);
    expect(feed.nextOrdinal).toBe(3);
    expect(log.gaps).toEqual([]);
  });

  it("drops already-seen ordinals so reconnects never duplicate lines", () => {
    const { sink, log } = recordingSink();
    const feed = new EventFeed(new FakeTransport(fixtures.as2Initial()), sink);
    feed.accept([feedEvent(0), feedEvent(1)]);
    feed.accept([feedEvent(0), feedEvent(1), feedEvent(2)]); // reconnect overlap
    expect(log.delivered.map((e) => e.ordinal)).toEqual([0, 1, 2]);
  });

  it("sorts out-of-order batches and drops in-batch duplicates", () => {
    const { sink, log } = recordingSink();
    const feed = new EventFeed(new FakeTransport(fixtures.as2Initial()), sink);
    feed.accept([feedEvent(2), feedEvent(0), feedEvent(1), feedEvent(2)]);
    expect(log.delivered.map((e) => e.ordinal)).toEqual([0, 1, 2]);
  });

  it("reports a gap but still admits the batch so the feed converges", () => {
    const { sink, log } = recordingSink();
    const feed = new EventFeed(new FakeTransport(fixtures.as2Initial()), sink);
    feed.accept([feedEvent(0)]);
    feed.accept([feedEvent(5), feedEvent(6)]);
    expect(log.gaps).toEqual([[1, 5]]);
    expect(log.delivered.map((e) => e.ordinal)).toEqual([0, 5, 6]);
    expect(feed.nextOrdinal).toBe(7);
  });
});

describe("polling", () => {
  it("resumes from the cursor and heartbeats on empty pages", async () => {
    const transport = new FakeTransport(fixtures.as2Initial());
    transport.eventPages = [[feedEvent(0), feedEvent(1)], [], []];
    const { sink, log } = recordingSink();
    const feed = new EventFeed(transport, sink);

    expect(await feed.pollOnce()).toBe(2);
    expect(transport.eventFetches).toEqual([0]);
    expect(log.heartbeats).toBe(0);

    expect(await feed.pollOnce()).toBe(0);
    expect(transport.eventFetches).toEqual([0, 2]); // resumed from ordinal 2
    expect(log.heartbeats).toBe(1);
  });

  it("re-polling an identical page delivers nothing twice", async () => {
    const transport = new FakeTransport(fixtures.as2Initial());
    transport.eventPages = [[feedEvent(0), feedEvent(1)]];
    const { sink, log } = recordingSink();
    const feed = new EventFeed(transport, sink);
    await feed.pollOnce();
    await feed.pollOnce(); // FakeTransport repeats its last page
    expect(log.delivered.map((e) => e.ordinal)).toEqual([0, 1]);
    expect(log.heartbeats).toBe(1);
  });
});

describe("transport selection", () => {
  beforeEach(() => vi.useFakeTimers());
  afterEach(() => vi.useRealTimers());

  it("prefers the server-push stream when it establishes", async () => {
    const transport = new FakeTransport(fixtures.as2Initial());
    let push: ((e: FeedEvent) => void) | null = null;
    (transport as Transport).openStream = async (since, onEvent): Promise<StreamCancel> => {
      expect(since).toBe(0);
      push = onEvent;
      return () => undefined;
    };
    const { sink, log } = recordingSink();
    const feed = new EventFeed(transport, sink);
    await feed.start();
    expect(feed.mode).toBe("stream");
    expect(log.modes).toEqual(["stream"]);
    push!(feedEvent(0));
    push!(feedEvent(0)); // duplicate frame after a server retry
    push!(feedEvent(1));
    expect(log.delivered.map((e) => e.ordinal)).toEqual([0, 1]);
    feed.stop();
  });

  it("falls back to 1 s polling when streaming is refused", async () => {
    const transport = new FakeTransport(fixtures.as2Initial());
    (transport as Transport).openStream = async () => {
      throw new Error("no stream for you");
    };
    transport.eventPages = [[feedEvent(0)]];
    const { sink, log } = recordingSink();
    const feed = new EventFeed(transport, sink);
    await feed.start();
    expect(feed.mode).toBe("poll");
    await vi.advanceTimersByTimeAsync(1_000);
    expect(log.delivered.map((e) => e.ordinal)).toEqual([0]);
    feed.stop();
  });

  it("falls back to polling when an established stream dies", async () => {
    const transport = new FakeTransport(fixtures.as2Initial());
    let die: ((reason: unknown) => void) | null = null;
    (transport as Transport).openStream = async (_s, _e, _k, onClose): Promise<StreamCancel> => {
      die = onClose;
      return () => undefined;
    };
    transport.eventPages = [[feedEvent(0)]];
    const { sink, log } = recordingSink();
    const feed = new EventFeed(transport, sink);
    await feed.start();
    expect(feed.mode).toBe("stream");
    die!(new Error("connection reset"));
    expect(feed.mode).toBe("poll");
    await vi.advanceTimersByTimeAsync(1_000);
    expect(log.delivered.map((e) => e.ordinal)).toEqual([0]);
    expect(log.modes).toEqual(["stream", "poll"]);
    feed.stop();
  });

  it("polls without streaming when the transport cannot stream at all", async () => {
    const transport = new FakeTransport(fixtures.as2Initial());
    transport.eventPages = [[]];
    const { sink, log } = recordingSink();
    const feed = new EventFeed(transport, sink);
    await feed.start();
    expect(feed.mode).toBe("poll");
    await vi.advanceTimersByTimeAsync(3_000);
    expect(log.heartbeats).toBe(3); // idle feed: heartbeat only
    expect(log.delivered).toEqual([]);
    feed.stop();
  });

  it("stops cleanly: no further polls after stop()", async () => {
    const transport = new FakeTransport(fixtures.as2Initial());
    transport.eventPages = [[]];
    const { sink } = recordingSink();
    const feed = new EventFeed(transport, sink);
    await feed.start();
    await vi.advanceTimersByTimeAsync(1_000);
    const fetchesAtStop = transport.eventFetches.length;
    feed.stop();
    await vi.advanceTimersByTimeAsync(5_000);
    expect(transport.eventFetches.length).toBe(fetchesAtStop);
  });
});
