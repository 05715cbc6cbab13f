import { describe, expect, it } from "vitest";

import { OperatorConsole } from "../src/app.js";
import { FakeTransport, feedEvent, fixtures } from "./helpers.js";

function openedConsole(transport: FakeTransport): { operator: OperatorConsole; frames: string[] } {
  const frames: string[] = [];
  const operator = new OperatorConsole(transport, (html) => frames.push(html));
  return { operator, frames };
}

describe("console lifecycle", () => {
  it("renders the connecting placeholder before open()", () => {
    const { operator } = openedConsole(new FakeTransport(fixtures.as2Initial()));
    expect(operator.view()).toContain("connecting");
  });

  it("open() fetches snapshot plus backlog and renders the scenario", async () => {
    const transport = new FakeTransport(fixtures.as2Initial());
    transport.eventPages = [[feedEvent(0), feedEvent(1)]];
    const { operator, frames } = openedConsole(transport);
    await operator.open();
    operator.close();
    expect(transport.stateFetches).toBe(1);
    expect(frames.length).toBeGreaterThan(0);
    const html = operator.view();
    expect(html).toContain("as2");
    expect(html).toContain("STATION_DOCKED");
    expect(operator.events.map((e) => e.ordinal)).toEqual([0, 1]);
  });

  it("two consoles opened on the same server data show the same screen", async () => {
    const a = new FakeTransport(fixtures.as2Alert());
    a.eventPages = [[feedEvent(0)]];
    const b = new FakeTransport(fixtures.as2Alert());
    b.eventPages = [[feedEvent(0)]];
    const one = openedConsole(a);
    const two = openedConsole(b);
    await one.operator.open();
    await two.operator.open();
    one.operator.close();
    two.operator.close();
    expect(one.operator.view()).toBe(two.operator.view());
  });
});

describe("command flow through the console", () => {
  it("updates the view only after the server accepted (2xx)", async () => {
    const transport = new FakeTransport(fixtures.as2Alert());
    const { operator } = openedConsole(transport);
    await operator.open();
    operator.close();

    let release: (value: { status: number; body: Record<string, unknown> }) => void;
    const gate = new Promise<{ status: number; body: Record<string, unknown> }>((resolve) => {
      release = resolve;
    });
    transport.postCommand = async () => gate;

    const before = operator.view();
    const pending = operator.send("ACK_ALERT");
    await Promise.resolve(); // let the request start
    expect(operator.view()).toBe(before); // nothing applied optimistically

    release!({
      status: 200,
      body: { ok: true, command_id: 1, ts_us: 1, kind: "ACK_ALERT", params: {}, issued_by: "operator" },
    });
    const outcome = await pending;
    expect(outcome.status).toBe("accepted");
    expect(operator.toast).toContain("ACK_ALERT accepted");
    expect(transport.stateFetches).toBeGreaterThanOrEqual(2); // snapshot refreshed after 2xx
  });

  it("shows a mode-conflict toast on 409 and leaves the snapshot alone", async () => {
    const transport = new FakeTransport(fixtures.as2Initial());
    transport.eventPages = [[]];
    const { operator } = openedConsole(transport);
    await operator.open();
    operator.close();
    const fetchesBefore = transport.stateFetches;
    transport.commandResponses = [{ status: 409, body: { error: "automatic control owns the breaker" } }];

    const outcome = await operator.send("BREAKER_SET", { closed: false });
    expect(outcome.status).toBe("conflict");
    expect(operator.view()).toContain("mode conflict");
    expect(transport.stateFetches).toBe(fetchesBefore); // no refresh on refusal
  });

  it("shows a retry prompt when the network drops the request", async () => {
    const transport = new FakeTransport(fixtures.as2Initial());
    const { operator } = openedConsole(transport);
    await operator.open();
    operator.close();
    transport.networkFailure = new Error("socket hang up");

    const outcome = await operator.send("ACK_ALERT");
    expect(outcome.status).toBe("network-error");
    expect(operator.view()).toContain("retry");
  });

  it("submits each operator action exactly once", async () => {
    const transport = new FakeTransport(fixtures.as2Alert());
    const { operator } = openedConsole(transport);
    await operator.open();
    operator.close();
    transport.commandResponses = [
      { status: 200, body: { ok: true, command_id: 1, ts_us: 1, kind: "ACK_ALERT", params: {}, issued_by: "operator" } },
      { status: 200, body: { ok: true, command_id: 2, ts_us: 2, kind: "BREAKER_SET", params: { closed: true }, issued_by: "operator" } },
    ];
    await operator.send("ACK_ALERT");
    await operator.send("BREAKER_SET", { closed: true });
    expect(transport.recordedCommands).toEqual([
      { kind: "ACK_ALERT", params: {} },
      { kind: "BREAKER_SET", params: { closed: true } },
    ]);
  });
});

describe("gap recovery", () => {
  it("refetches the snapshot when the feed reports a discontinuity", async () => {
    const transport = new FakeTransport(fixtures.as2Initial());
    transport.eventPages = [[feedEvent(0)]];
    const { operator } = openedConsole(transport);
    await operator.open();
    operator.close();
    const fetchesBefore = transport.stateFetches;

    // Simulate a lossy transport delivering a batch that skips ordinals.
    operator["feed"].accept([feedEvent(7)]);
    await Promise.resolve();
    await Promise.resolve();
    expect(transport.stateFetches).toBe(fetchesBefore + 1);
    expect(operator.events.map((e) => e.ordinal)).toEqual([0, 7]);
  });
});
