/**
 * Pure projection of server documents into what the console displays.
 *
 * `buildViewModel(state, events)` is a pure function: two consoles holding
 * the same /state snapshot and /events backlog produce identical view
 * models, which is what makes closing and reopening the console mid-run
 * converge to the same screen.  No field is computed by simulating
 * anything client-side.
 */

import {
  FeedEvent,
  GridDoc,
  HmiDoc,
  MilestoneDoc,
  OutcomeDoc,
  StateDocument,
  StationDoc,
  SUPPORTED_SCHEMA,
} from "./backend.js";

export interface TrainView {
  id: string;
  track: string;
  blockId: string;
  positionPct: number;
  speedMps: number;
  powered: boolean;
  alive: boolean;
  docked: boolean;
  /** True when the train is not moving (speed exactly zero). */
  stopped: boolean;
}

export interface BlockView {
  id: string;
  track: string;
  index: number;
  occupied: boolean;
  signal: "red" | "green";
}

export interface TrackView {
  id: string;
  blocks: number;
  lengthM: number;
  stations: StationDoc[];
  trains: TrainView[];
}

export interface MilestoneView {
  label: string;
  deadlineUs: number;
  reachedUs: number | null;
  reached: boolean;
}

/** Operator command reconstructed from its `operator_cmd` event echo. */
export interface CommandLogView {
  seq: number;
  tsUs: number;
  kind: string;
  params: Record<string, unknown>;
}

export interface ViewModel {
  /** Human-readable refusal when the server schema is unsupported, else null. */
  schemaMismatch: string | null;
  scenario: string;
  seed: number;
  simTimeUs: number;
  simIso: string;
  durationUs: number;
  paused: boolean;
  finished: boolean;
  tracks: TrackView[];
  blocks: BlockView[];
  trains: TrainView[];
  grid: GridDoc;
  hmi: HmiDoc | null;
  /** True when the HMI is in ALERT mode — drives the alert banner. */
  alert: boolean;
  collisions: string[][];
  milestones: MilestoneView[];
  outcome: OutcomeDoc | null;
  /** Formatted ticker lines, oldest first; a terminal outcome stays last. */
  ticker: string[];
  commandLog: CommandLogView[];
}

/** Kinds that end a run's story; the ticker pins them as its final line. */
const TERMINAL_KINDS = new Set(["COLLISION", "outcome"]);

export const TICKER_LIMIT = 12;

export function formatEvent(event: FeedEvent): string {
  const seconds = Math.floor(event.ts_us / 1_000_000);
  const tail = [event.subject, event.detail].filter((part) => part !== "").join(" ");
  return `[+${seconds}s] ${event.kind}${tail ? " " + tail : ""}`;
}

/**
 * Latest `limit` event lines, oldest first.  Once a terminal event
 * (collision / recorded outcome) has appeared, its line is pinned to the
 * end of the ticker: routine traffic from surviving trains keeps scrolling
 * above it, but the outcome stays the last word.
 */
export function buildTicker(events: FeedEvent[], limit: number = TICKER_LIMIT): string[] {
  let terminal: FeedEvent | null = null;
  for (const event of events) {
    if (TERMINAL_KINDS.has(event.kind)) terminal = event;
  }
  const scroll = events
    .filter((e) => e !== terminal)
    .slice(terminal === null ? -limit : -(limit - 1))
    .map(formatEvent);
  if (terminal !== null) scroll.push(formatEvent(terminal));
  return scroll;
}

/**
 * The operator command log as seen in the event stream.  Every accepted
 * command is echoed exactly once as an `operator_cmd` event (subject =
 * kind, detail = canonical params JSON), so this reconstruction matches
 * the server's log without needing any endpoint beyond /events.
 */
export function buildCommandLog(events: FeedEvent[]): CommandLogView[] {
  const log: CommandLogView[] = [];
  for (const event of events) {
    if (event.kind !== "operator_cmd") continue;
    let params: Record<string, unknown> = {};
    try {
      params = JSON.parse(event.detail || "{}") as Record<string, unknown>;
    } catch {
      params = { raw: event.detail };
    }
    log.push({ seq: log.length + 1, tsUs: event.ts_us, kind: event.subject, params });
  }
  return log;
}

function milestoneViews(milestones: MilestoneDoc[]): MilestoneView[] {
  return milestones.map((m) => ({
    label: m.step_label,
    deadlineUs: m.deadline_us,
    reachedUs: m.reached_us,
    reached: m.reached_us !== null,
  }));
}

export function buildViewModel(state: StateDocument, events: FeedEvent[]): ViewModel {
  const mismatch =
    state.schema_version === SUPPORTED_SCHEMA
      ? null
      : `state schema "${state.schema_version}" is not supported ` +
        `(this console renders schema "${SUPPORTED_SCHEMA}")`;

  const trains: TrainView[] = state.trains.map((t) => ({
    id: t.id,
    track: t.track,
    blockId: t.block_id,
    positionPct: t.position_pct,
    speedMps: t.speed_mps,
    powered: t.powered,
    alive: t.alive,
    docked: t.docked,
    stopped: t.speed_mps === 0,
  }));
  const byTrack = new Map<string, TrainView[]>();
  for (const train of trains) {
    const bucket = byTrack.get(train.track) ?? [];
    bucket.push(train);
    byTrack.set(train.track, bucket);
  }
  const tracks: TrackView[] = state.tracks.map((tr) => ({
    id: tr.id,
    blocks: tr.blocks,
    lengthM: tr.length_m,
    stations: tr.stations,
    trains: byTrack.get(tr.id) ?? [],
  }));

  return {
    schemaMismatch: mismatch,
    scenario: state.scenario,
    seed: state.seed,
    simTimeUs: state.sim_time_us,
    simIso: state.sim_iso,
    durationUs: state.duration_us,
    paused: state.paused,
    finished: state.finished,
    tracks,
    blocks: state.blocks.map((b) => ({
      id: b.id,
      track: b.track,
      index: b.index,
      occupied: b.occupied,
      signal: b.signal,
    })),
    trains,
    grid: state.grid,
    hmi: state.hmi,
    alert: state.hmi !== null && state.hmi.mode === "ALERT",
    collisions: state.collisions,
    milestones: milestoneViews(state.milestones),
    outcome: state.outcome,
    ticker: buildTicker(events),
    commandLog: buildCommandLog(events),
  };
}
