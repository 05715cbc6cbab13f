import { describe, expect, it } from "vitest";

import { sendCommand } from "../src/commands.js";
import { FakeTransport, fixtures } from "./helpers.js";

describe("command outcome classification", () => {
  it("maps 200 to accepted with the server's command entry", async () => {
    const transport = new FakeTransport(fixtures.as2Alert());
    transport.commandResponses = [
      {
        status: 200,
        body: { ok: true, command_id: 1, ts_us: 10_801_000_000, kind: "ACK_ALERT", params: {}, issued_by: "operator" },
      },
    ];
    const outcome = await sendCommand(transport, "ACK_ALERT");
    expect(outcome.status).toBe("accepted");
    if (outcome.status === "accepted") {
      expect(outcome.entry.command_id).toBe(1);
      expect(outcome.entry.issued_by).toBe("operator");
    }
    expect(transport.recordedCommands).toEqual([{ kind: "ACK_ALERT", params: {} }]);
  });

  it("maps 409 to a mode-conflict message carrying the server's reason", async () => {
    const transport = new FakeTransport(fixtures.as2Initial());
    transport.commandResponses = [
      { status: 409, body: { error: "automatic control owns the breaker; halt it or wait for an alert" } },
    ];
    const outcome = await sendCommand(transport, "BREAKER_SET", { closed: false });
    expect(outcome.status).toBe("conflict");
    if (outcome.status === "conflict") {
      expect(outcome.message).toContain("mode conflict");
      expect(outcome.message).toContain("automatic control owns the breaker");
    }
  });

  it("maps 400 to rejected with the validation error", async () => {
    const transport = new FakeTransport(fixtures.as2Alert());
    transport.commandResponses = [{ status: 400, body: { error: "params.closed must be a boolean" } }];
    const outcome = await sendCommand(transport, "BREAKER_SET", { closed: "yes" });
    expect(outcome.status).toBe("rejected");
    if (outcome.status === "rejected") {
      expect(outcome.message).toContain("params.closed must be a boolean");
    }
  });

  it("maps transport failure to a retry prompt", async () => {
    const transport = new FakeTransport(fixtures.as2Alert());
    transport.networkFailure = new Error("ECONNREFUSED");
    const outcome = await sendCommand(transport, "ACK_ALERT");
    expect(outcome.status).toBe("network-error");
    if (outcome.status === "network-error") {
      expect(outcome.message).toContain("retry");
      expect(outcome.message).toContain("ECONNREFUSED");
    }
    expect(transport.recordedCommands).toEqual([]); // never reached the server
  });
});
