/**
 * Wire types for the railrange control API.
 *
 * The console consumes exactly three contracts — GET /state, GET /events,
 * POST /command — and these interfaces mirror those JSON documents
 * field-for-field.  Nothing here is simulated client-side; every value is
 * the server's.
 */

/** The state-document schema generation this console understands. */
export const SUPPORTED_SCHEMA = "1";

export interface StationDoc {
  block: number;
  block_id: string;
}

export interface TrackDoc {
  id: string;
  blocks: number;
  block_m: number;
  length_m: number;
  stations: StationDoc[];
}

export interface BlockDoc {
  id: string;
  track: string;
  index: number;
  occupied: boolean;
  signal: "red" | "green";
}

export interface TrainDoc {
  id: string;
  track: string;
  block: number;
  block_id: string;
  offset_m: number;
  speed_mps: number;
  powered: boolean;
  alive: boolean;
  docked: boolean;
  /** Per-train loop position, 0 <= pct < 100, computed by the server. */
  position_pct: number;
}

export interface GridDoc {
  voltage: number;
  current: number;
  power_w: number;
  breaker_closed: boolean;
}

export interface HmiReadingDoc {
  voltage: number;
  current: number;
  ts_us: number;
}

export interface HmiAlertDoc {
  ts_us: number;
  voltage: number;
  current: number;
  acked: boolean;
}

export interface HmiDoc {
  mode: string;
  auto_control: boolean;
  last_reading: HmiReadingDoc;
  thresholds: {
    voltage: [number, number];
    current: [number, number];
  };
  alerts: HmiAlertDoc[];
}

export interface MilestoneDoc {
  step_label: string;
  deadline_us: number;
  reached_us: number | null;
}

export interface OutcomeDoc {
  ts_us: number;
  kind: string;
  subject: string;
  detail: string;
}

export interface StateDocument {
  schema_version: string;
  scenario: string;
  seed: number;
  sim_time_us: number;
  sim_iso: string;
  duration_us: number;
  paused: boolean;
  finished: boolean;
  tracks: TrackDoc[];
  blocks: BlockDoc[];
  trains: TrainDoc[];
  grid: GridDoc;
  collisions: string[][];
  hmi: HmiDoc | null;
  milestones: MilestoneDoc[];
  outcome: OutcomeDoc | null;
  event_count: number;
  commands_applied: number;
}

/** One entry of the ordered event stream; ordinals start at 0. */
export interface FeedEvent {
  ordinal: number;
  ts_us: number;
  kind: string;
  subject: string;
  detail: string;
}

/** GET /events?since=N response in plain-JSON (non-stream) mode. */
export interface EventsPage {
  events: FeedEvent[];
  next: number;
  paused: boolean;
  finished: boolean;
}

export type CommandKind =
  | "BREAKER_SET"
  | "HALT_AUTO"
  | "RESUME_AUTO"
  | "ACK_ALERT"
  | "TRAIN_ESTOP";

/** Accepted-command echo returned by POST /command on 200. */
export interface CommandEntry {
  command_id: number;
  ts_us: number;
  kind: string;
  params: Record<string, unknown>;
  issued_by: string;
}
