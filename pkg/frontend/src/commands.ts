/**
 * Operator command submission and outcome classification.
 *
 * The console updates its view only after the server answered 2xx — there
 * is no speculative local state.  A 409 is the server refusing a command
 * that conflicts with the current control mode (e.g. setting the breaker
 * while automatic control owns it); it is surfaced as a mode-conflict
 * notice, not an error.
 */

import { CommandEntry } from "./backend.js";
import { Transport } from "./transport.js";

export type CommandOutcome =
  | { status: "accepted"; entry: CommandEntry }
  | { status: "conflict"; message: string }
  | { status: "rejected"; message: string }
  | { status: "network-error"; message: string };

function serverError(body: Record<string, unknown>): string {
  return typeof body.error === "string" ? body.error : JSON.stringify(body);
}

export async function sendCommand(
  transport: Transport,
  kind: string,
  params: Record<string, unknown> = {}
): Promise<CommandOutcome> {
  let status: number;
  let body: Record<string, unknown>;
  try {
    ({ status, body } = await transport.postCommand(kind, params));
  } catch (reason) {
    const detail = reason instanceof Error ? reason.message : String(reason);
    return {
      status: "network-error",
      message: `network failure sending ${kind} (${detail}) — check the connection and retry`,
    };
  }
  if (status >= 200 && status < 300) {
    return { status: "accepted", entry: body as unknown as CommandEntry };
  }
  if (status === 409) {
    return { status: "conflict", message: `mode conflict: ${serverError(body)}` };
  }
  return { status: "rejected", message: `${kind} rejected: ${serverError(body)}` };
}
