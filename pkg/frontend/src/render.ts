/**
 * HTML renderer for the operator console.
 *
 * `renderState(vm)` turns a view model into a complete HTML fragment and is
 * a pure function of its inputs, so every screen the console can show is
 * testable as a string, with no DOM required.  The track map is schematic:
 * each track is a loop and each train marker sits at its proportional
 * position along that loop.
 */

import { ViewModel, TrainView, TrackView, BlockView, MilestoneView } from "./viewmodel.js";

/** Transient, presentation-only extras layered over the view model. */
export interface RenderOptions {
  /** Last command/transport notice ("toast"); null hides the notice bar. */
  toast?: string | null;
  /** True briefly after each idle heartbeat from the event feed. */
  heartbeat?: boolean;
}

const SVG_W = 250;
const SVG_H = 250;
const LOOP_R = 92;
const CX = SVG_W / 2;
const CY = SVG_H / 2;

export function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

/** Angle for a loop position: 0% is the top of the loop, clockwise. */
function loopPoint(pct: number, radius: number): { x: number; y: number } {
  const theta = (pct / 100) * 2 * Math.PI - Math.PI / 2;
  return {
    x: CX + radius * Math.cos(theta),
    y: CY + radius * Math.sin(theta),
  };
}

function trainMarker(train: TrainView): string {
  const { x, y } = loopPoint(train.positionPct, LOOP_R);
  const classes = ["train-marker"];
  classes.push(train.powered ? "powered" : "unpowered");
  if (train.stopped) classes.push("stopped");
  if (!train.alive) classes.push("wrecked");
  if (train.docked) classes.push("docked");
  return (
    `<g class="${classes.join(" ")}" data-train="${esc(train.id)}"` +
    ` data-pct="${train.positionPct}">` +
    `<circle cx="${x.toFixed(1)}" cy="${y.toFixed(1)}" r="7"></circle>` +
    `<text x="${x.toFixed(1)}" y="${(y - 11).toFixed(1)}">${esc(train.id)}</text>` +
    `</g>`
  );
}

function trackLoop(track: TrackView): string {
  const stations = track.stations
    .map((s) => {
      const pct = track.lengthM > 0 ? (100 * s.block * (track.lengthM / track.blocks)) / track.lengthM : 0;
      const outer = loopPoint(pct, LOOP_R + 8);
      const inner = loopPoint(pct, LOOP_R - 8);
      return (
        `<line class="station-tick" data-station="${esc(s.block_id)}" ` +
        `x1="${inner.x.toFixed(1)}" y1="${inner.y.toFixed(1)}" ` +
        `x2="${outer.x.toFixed(1)}" y2="${outer.y.toFixed(1)}"></line>`
      );
    })
    .join("");
  const markers = track.trains.map(trainMarker).join("");
  return (
    `<svg class="track-loop" data-track="${esc(track.id)}" viewBox="0 0 ${SVG_W} ${SVG_H}">` +
    `<circle class="loop-rail" cx="${CX}" cy="${CY}" r="${LOOP_R}"></circle>` +
    `<text class="loop-label" x="${CX}" y="${CY}">${esc(track.id)}</text>` +
    stations +
    markers +
    `</svg>`
  );
}

function blockStrip(track: TrackView, blocks: BlockView[]): string {
  const cells = blocks
    .filter((b) => b.track === track.id)
    .map(
      (b) =>
        `<span class="block ${b.occupied ? "occupied" : "free"} signal-${b.signal}" ` +
        `title="${esc(b.id)} (${b.signal})"></span>`
    )
    .join("");
  return `<div class="block-strip" data-track="${esc(track.id)}"><b>${esc(track.id)}</b>${cells}</div>`;
}

function gridPanel(vm: ViewModel): string {
  const g = vm.grid;
  const breaker = g.breaker_closed ? "CLOSED" : "OPEN";
  return (
    `<section class="panel grid-panel">` +
    `<h2>traction power</h2>` +
    `<p class="grid-readout">${g.voltage} V &middot; ${g.current} A &middot; ` +
    `<span class="power-w" data-power="${g.power_w}">${g.power_w} W</span></p>` +
    `<p>breaker <span class="breaker ${breaker.toLowerCase()}">${breaker}</span></p>` +
    `</section>`
  );
}

function hmiPanel(vm: ViewModel): string {
  if (vm.hmi === null) {
    return `<section class="panel hmi-panel"><h2>protection</h2><p>no HMI in this scenario</p></section>`;
  }
  const h = vm.hmi;
  const [vLo, vHi] = h.thresholds.voltage;
  const [aLo, aHi] = h.thresholds.current;
  return (
    `<section class="panel hmi-panel">` +
    `<h2>protection</h2>` +
    `<p>mode <span class="hmi-mode mode-${esc(h.mode.toLowerCase())}">${esc(h.mode)}</span>, ` +
    `automatic control ${h.auto_control ? "active" : "halted"}</p>` +
    `<p>last reading ${h.last_reading.voltage} V / ${h.last_reading.current} A ` +
    `(limits ${vLo}&ndash;${vHi} V, ${aLo}&ndash;${aHi} A)</p>` +
    `</section>`
  );
}

function milestonePanel(milestones: MilestoneView[]): string {
  if (milestones.length === 0) {
    return `<section class="panel milestone-panel"><h2>milestones</h2><p>none scheduled</p></section>`;
  }
  const rows = milestones
    .map((m) => {
      const mark = m.reached ? "&#10003;" : "&middot;";
      const when = m.reached
        ? `+${Math.floor((m.reachedUs as number) / 1_000_000)}s`
        : `due +${Math.floor(m.deadlineUs / 1_000_000)}s`;
      return (
        `<li class="milestone ${m.reached ? "reached" : "pending"}">` +
        `${mark} ${esc(m.label)} <small>${when}</small></li>`
      );
    })
    .join("");
  return `<section class="panel milestone-panel"><h2>milestones</h2><ol>${rows}</ol></section>`;
}

function tickerPanel(vm: ViewModel, opts: RenderOptions): string {
  const lines = vm.ticker.map((line) => `<li>${esc(line)}</li>`).join("");
  const heartbeat = opts.heartbeat ? ` <span class="heartbeat" title="feed alive">&#9679;</span>` : "";
  const body = lines
    ? `<ul class="ticker">${lines}</ul>`
    : `<p class="ticker-empty">no events yet</p>`;
  return `<section class="panel ticker-panel"><h2>events${heartbeat}</h2>${body}</section>`;
}

function commandPanel(vm: ViewModel): string {
  const rows = vm.commandLog
    .map(
      (c) =>
        `<li class="command-entry" data-kind="${esc(c.kind)}">#${c.seq} ` +
        `[+${Math.floor(c.tsUs / 1_000_000)}s] ${esc(c.kind)} ${esc(JSON.stringify(c.params))}</li>`
    )
    .join("");
  const trains = vm.trains
    .map((t) => `<option value="${esc(t.id)}">${esc(t.id)}</option>`)
    .join("");
  return (
    `<section class="panel command-panel">` +
    `<h2>operator</h2>` +
    `<div class="command-buttons">` +
    `<button data-command="ACK_ALERT">acknowledge alert</button>` +
    `<button data-command="BREAKER_SET" data-params='{"closed":true}'>close breaker</button>` +
    `<button data-command="BREAKER_SET" data-params='{"closed":false}'>open breaker</button>` +
    `<button data-command="HALT_AUTO">halt automatic control</button>` +
    `<button data-command="RESUME_AUTO">resume automatic control</button>` +
    `<select class="estop-train">${trains}</select>` +
    `<button data-command="TRAIN_ESTOP" data-params-from="estop-train">emergency stop</button>` +
    `<button data-pacing="pause">pause</button>` +
    `<button data-pacing="resume">resume run</button>` +
    `</div>` +
    (rows ? `<ol class="command-log">${rows}</ol>` : `<p class="command-log-empty">no commands issued</p>`) +
    `</section>`
  );
}

function banners(vm: ViewModel, opts: RenderOptions): string {
  const parts: string[] = [];
  if (vm.alert && vm.hmi !== null) {
    const r = vm.hmi.last_reading;
    parts.push(
      `<div class="banner alert">&#9888; ALERT &mdash; reading ${r.voltage} V / ${r.current} A ` +
        `outside protection limits; automatic control ${vm.hmi.auto_control ? "active" : "halted"}</div>`
    );
  }
  if (vm.outcome !== null) {
    parts.push(
      `<div class="banner outcome">run outcome: ${esc(vm.outcome.kind)} ` +
        `${esc(vm.outcome.subject)} ${esc(vm.outcome.detail)}</div>`
    );
  }
  if (opts.toast) {
    parts.push(`<div class="banner toast">${esc(opts.toast)}</div>`);
  }
  return parts.join("");
}

function header(vm: ViewModel): string {
  const status = vm.finished ? "finished" : vm.paused ? "paused" : "running";
  return (
    `<header class="console-header">` +
    `<h1>${esc(vm.scenario)} <small>seed ${vm.seed}</small></h1>` +
    `<p class="clock">${esc(vm.simIso)} (+${Math.floor(vm.simTimeUs / 1_000_000)}s) ` +
    `<span class="run-status status-${status}">${status}</span></p>` +
    `</header>`
  );
}

export function renderState(vm: ViewModel, opts: RenderOptions = {}): string {
  if (vm.schemaMismatch !== null) {
    // Unsupported schema: refuse to render fields whose meaning we cannot
    // trust; show only the refusal banner.
    return (
      `<div class="console">` +
      `<div class="banner schema-mismatch">${esc(vm.schemaMismatch)}</div>` +
      `</div>`
    );
  }
  const loops = vm.tracks.map(trackLoop).join("");
  const strips = vm.tracks.map((t) => blockStrip(t, vm.blocks)).join("");
  return (
    `<div class="console">` +
    header(vm) +
    banners(vm, opts) +
    `<div class="track-map">${loops}</div>` +
    `<div class="block-strips">${strips}</div>` +
    `<div class="panels">` +
    gridPanel(vm) +
    hmiPanel(vm) +
    milestonePanel(vm.milestones) +
    tickerPanel(vm, opts) +
    commandPanel(vm) +
    `</div>` +
    `</div>`
  );
}
