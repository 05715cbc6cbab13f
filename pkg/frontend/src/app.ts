/**
 * Console orchestration: one rendering loop fed by two independent
 * asynchronous channels (the event feed and command submissions).
 *
 * All state lives in two server-derived fields — the latest /state
 * snapshot and the accumulated /events backlog — plus transient
 * presentation extras (toast, heartbeat).  Snapshot refreshes are
 * last-write-wins: whatever /state answered most recently replaces the
 * held snapshot wholesale.  Because the view is a pure function of
 * (snapshot, backlog), a console closed and reopened mid-run converges to
 * the same screen as one that stayed connected.
 */

import { FeedEvent, StateDocument } from "./backend.js";
import { CommandOutcome, sendCommand } from "./commands.js";
import { EventFeed, FeedMode } from "./feed.js";
import { renderState } from "./render.js";
import { Transport } from "./transport.js";
import { buildViewModel } from "./viewmodel.js";

export class OperatorConsole {
  state: StateDocument | null = null;
  events: FeedEvent[] = [];
  toast: string | null = null;
  heartbeat = false;
  feedMode: FeedMode | null = null;

  private readonly feed: EventFeed;

  constructor(
    private readonly transport: Transport,
    private readonly present: (html: string) => void = () => undefined,
    pollPeriodMs?: number
  ) {
    this.feed = new EventFeed(
      transport,
      {
        onEvents: (batch) => {
          this.events.push(...batch);
          this.heartbeat = false;
          this.render();
        },
        onGap: () => {
          // Lost continuity: trust nothing derived, refetch the snapshot.
          void this.refreshState();
        },
        onHeartbeat: () => {
          this.heartbeat = true;
          this.render();
        },
        onMode: (mode) => {
          this.feedMode = mode;
        },
      },
      pollPeriodMs
    );
  }

  /** Fetch the snapshot and backlog, then start the live feed. */
  async open(): Promise<void> {
    const [state, page] = await Promise.all([
      this.transport.fetchState(),
      this.transport.fetchEvents(0),
    ]);
    this.state = state;
    this.feed.accept(page.events);
    this.render();
    await this.feed.start();
  }

  close(): void {
    this.feed.stop();
  }

  async refreshState(): Promise<void> {
    this.state = await this.transport.fetchState();
    this.render();
  }

  /**
   * Submit an operator command.  The view changes only after the server
   * answered: 2xx refreshes the snapshot (and the command's event echo
   * arrives via the feed); 409 becomes a mode-conflict notice; transport
   * failure becomes a retry prompt.  Nothing is applied optimistically
   * before the 2xx.
   */
  async send(kind: string, params: Record<string, unknown> = {}): Promise<CommandOutcome> {
    const outcome = await sendCommand(this.transport, kind, params);
    if (outcome.status === "accepted") {
      this.toast = `${kind} accepted (command #${outcome.entry.command_id})`;
      await this.refreshState();
    } else {
      this.toast = outcome.message;
      this.render();
    }
    return outcome;
  }

  async setPaused(paused: boolean): Promise<void> {
    await this.transport.setPaused(paused);
    await this.refreshState();
  }

  /** The complete screen as HTML — pure projection of held server data. */
  view(): string {
    if (this.state === null) {
      return `<div class="console"><p class="connecting">connecting&hellip;</p></div>`;
    }
    return renderState(buildViewModel(this.state, this.events), {
      toast: this.toast,
      heartbeat: this.heartbeat,
    });
  }

  private render(): void {
    this.present(this.view());
  }
}
