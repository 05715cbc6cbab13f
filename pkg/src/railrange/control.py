"""Live scenario control: paced runs, state snapshots, an event stream, and
operator commands.

`ControlSession` is the single-threaded core: it owns one scenario runtime,
advances it in fixed simulation quanta, publishes consistent state
snapshots at quantum boundaries, collects the operator-relevant event
stream with stable ordinals, and applies operator commands at quiescent
points (never mid-scan-cycle).  Commands are validated, applied, logged
with their simulation timestamp, and echoed as ``operator_cmd`` events —
so a recorded command log replayed with `replay_commands` reproduces the
run exactly.

`ControlServer` adapts a session to HTTP for the operator console:

    GET  /state            latest published snapshot (JSON)
    GET  /events?since=N   event backlog from ordinal N (JSON), or a
                           server-push stream under Accept: text/event-stream
    GET  /commands         the accepted-command log
    POST /command          {"kind": ..., "params": {...}} -> 200/400/409
    POST /pause, /resume   session pacing control

HTTP handlers never touch the simulation: reads serve the latest published
snapshot, writes enqueue onto the pacing thread and wait for its verdict.
"""

from __future__ import annotations

import json
import queue
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import List, Optional, Tuple

from .errors import ValidationError
from .otdevices import Hmi
from .physics import block_id
from .scenario.orchestrator import ScenarioRuntime

SCHEMA_VERSION = "1"

COMMAND_KINDS = ("BREAKER_SET", "HALT_AUTO", "RESUME_AUTO", "ACK_ALERT", "TRAIN_ESTOP")

# What the operator console sees: physical events, HMI workflow, range
# progress markers, and its own commands.  Attacker-internal telemetry
# (c2 traffic, implant chatter) never reaches this stream, and high-rate
# block transitions are left out of the ticker.
UI_EVENT_KINDS = frozenset(
    {
        "AVOIDANCE_ON",
        "AVOIDANCE_OFF",
        "TRACTION_CUT",
        "TRACTION_RESTORED",
        "POWER_LOST",
        "POWER_RESTORED",
        "STATION_DOCKED",
        "STATION_DEPARTED",
        "COLLISION",
        "BREAKER_OPENED",
        "BREAKER_CLOSED",
        "alert_raised",
        "alert_acked",
        "auto_halted",
        "auto_resumed",
        "breaker_open_cmd",
        "operator_breaker_cmd",
        "breaker_cmd",
        "breaker_applied",
        "milestone",
        "milestone_missed",
        "outcome",
        "operator_cmd",
    }
)

QUANTUM_US = 1_000_000  # sim time advanced per pacing step
SNAPSHOT_MIN_WALL_S = 0.05  # throttle snapshot rebuilds during fast advances


class ControlSession:
    """One controllable scenario run.  All mutation happens on one thread."""

    def __init__(self, spec, seed: Optional[int] = None, pause_at: Optional[str] = None):
        if pause_at is not None and pause_at not in {m.step_label for m in spec.milestones}:
            raise ValidationError(f"--pause-at {pause_at!r} is not a milestone of {spec.name}")
        self.runtime = ScenarioRuntime(spec, seed=seed, strict_milestones=False)
        self.spec = spec
        self.pause_at = pause_at
        self.paused = False
        self.finished = False
        self.events: List[dict] = []
        self.command_log: List[dict] = []
        self._lock = threading.RLock()
        self.new_event = threading.Condition(self._lock)
        self._snapshot: dict = {}
        self._last_publish_wall = 0.0
        self._hmi: Optional[Hmi] = next(
            (d for d in self.runtime.devices.values() if isinstance(d, Hmi)), None
        )
        self.runtime.hub.subscribe(self._on_event)
        self._publish()

    # -- event collection ----------------------------------------------------

    def _on_event(self, ts: int, kind: str, subject: str, detail: str) -> None:
        if kind == "milestone" and self.pause_at is not None and subject == self.pause_at:
            self.paused = True
        if kind not in UI_EVENT_KINDS:
            return
        with self.new_event:
            self.events.append(
                {
                    "ordinal": len(self.events),
                    "ts_us": ts,
                    "kind": kind,
                    "subject": subject,
                    "detail": detail,
                }
            )
            self.new_event.notify_all()

    # -- state snapshot ------------------------------------------------------

    def _publish(self) -> None:
        with self._lock:
            self._snapshot = self._build_state()
            self._last_publish_wall = time.monotonic()

    def state(self) -> dict:
        with self._lock:
            return self._snapshot

    def set_paused(self, paused: bool) -> None:
        """Toggle the pause flag and republish so /state reflects it."""
        with self._lock:
            self.paused = bool(paused)
            self._publish()

    def _build_state(self) -> dict:
        rt = self.runtime
        world = rt.world
        layout = self.spec.layout
        tracks, blocks = [], []
        for tr in layout.tracks:
            stations = [
                {"block": s.block, "block_id": block_id(tr.id, s.block)}
                for s in layout.stations
                if s.track == tr.id
            ]
            tracks.append(
                {
                    "id": tr.id,
                    "blocks": tr.blocks,
                    "block_m": tr.block_m,
                    "length_m": tr.blocks * tr.block_m,
                    "stations": stations,
                }
            )
            for i in range(tr.blocks):
                blocks.append(
                    {
                        "id": block_id(tr.id, i),
                        "track": tr.id,
                        "index": i,
                        "occupied": world.occupied(tr.id, i),
                        "signal": "red" if world.signal_red(tr.id, i) else "green",
                    }
                )
        world_state = world.to_state()
        by_track = {t["id"]: t for t in tracks}
        trains = []
        for t in world_state["trains"]:
            track = by_track[t["track"]]
            abs_m = t["block"] * track["block_m"] + t["offset_m"]
            trains.append({**t, "position_pct": round(100.0 * abs_m / track["length_m"], 3)})
        outcome = None
        if rt.outcome_event is not None:
            ts, kind, subject, detail = rt.outcome_event
            outcome = {"ts_us": ts, "kind": kind, "subject": subject, "detail": detail}
        return {
            "schema_version": SCHEMA_VERSION,
            "scenario": self.spec.name,
            "seed": rt.seed,
            "sim_time_us": rt.loop.now,
            "sim_iso": rt.loop.iso(),
            "duration_us": self.spec.duration_us,
            "paused": self.paused,
            "finished": self.finished,
            "tracks": tracks,
            "blocks": blocks,
            "trains": trains,
            "grid": world_state["grid"],
            "collisions": world_state["collisions"],
            "hmi": self._hmi.to_state() if self._hmi is not None else None,
            "milestones": [
                {
                    "step_label": w.step_label,
                    "deadline_us": w.deadline_us,
                    "reached_us": w.reached_us,
                }
                for w in rt._watches
            ],
            "outcome": outcome,
            "event_count": len(self.events),
            "commands_applied": len(self.command_log),
        }

    def events_since(self, ordinal: int, limit: int = 1000) -> List[dict]:
        with self._lock:
            return self.events[max(ordinal, 0) : max(ordinal, 0) + limit]

    # -- pacing --------------------------------------------------------------

    def advance(self, sim_target_us: int) -> None:
        """Advance to `sim_target_us` in quanta, honoring the pause flag."""
        rt = self.runtime
        target = min(sim_target_us, self.spec.duration_us)
        while rt.loop.now < target and not self.paused:
            with self._lock:
                rt.advance_to(min(rt.loop.now + QUANTUM_US, target))
            if time.monotonic() - self._last_publish_wall > SNAPSHOT_MIN_WALL_S:
                self._publish()
        if rt.loop.now >= self.spec.duration_us and not self.finished:
            self.finished = True
            rt.report = rt.build_report()
        self._publish()

    def run_to_pause(self) -> None:
        """Advance until the pause flag trips or the scenario ends."""
        self.advance(self.spec.duration_us)

    # -- operator commands ---------------------------------------------------

    def submit(self, kind: str, params: Optional[dict] = None) -> Tuple[int, dict]:
        """Validate and apply one operator command at the current sim time.

        Returns (http_status, body).  Accepted commands are appended to the
        command log and echoed into the event stream exactly once.
        """
        params = dict(params or {})
        with self._lock:
            return self._apply(kind, params)

    def _apply(self, kind: str, params: dict) -> Tuple[int, dict]:
        rt = self.runtime
        hmi = self._hmi
        if kind not in COMMAND_KINDS:
            return 400, {"error": f"unknown command kind {kind!r}", "accepted": list(COMMAND_KINDS)}
        if kind in ("ACK_ALERT", "RESUME_AUTO", "HALT_AUTO") and hmi is None:
            return 400, {"error": f"{kind} needs an hmi device; scenario {self.spec.name} has none"}

        if kind == "BREAKER_SET":
            closed = params.get("closed")
            if not isinstance(closed, bool):
                return 400, {"error": "params.closed must be a boolean"}
            if hmi is not None:
                if hmi.auto_control and hmi.mode == "NORMAL":
                    return 409, {
                        "error": "automatic control owns the breaker; halt it or wait for an alert"
                    }
                hmi.operator_breaker(closed)
            else:
                rt.world.breaker_set(closed)
        elif kind == "ACK_ALERT":
            if not hmi.ack_alert():
                return 409, {"error": "no active alert to acknowledge"}
        elif kind == "RESUME_AUTO":
            if not hmi.resume_auto():
                return 409, {"error": "automatic control is already active"}
        elif kind == "HALT_AUTO":
            if not hmi.auto_control:
                return 409, {"error": "automatic control is already halted"}
            hmi.auto_control = False
            hmi.sink(hmi.name, "auto_halted", "operator")
        elif kind == "TRAIN_ESTOP":
            train = params.get("train")
            if train not in rt.world.trains:
                return 400, {"error": f"unknown train {train!r}"}
            rt.world.set_brake_command(train, True)

        entry = {
            "command_id": len(self.command_log) + 1,
            "ts_us": rt.loop.now,
            "kind": kind,
            "params": params,
            "issued_by": "operator",
        }
        self.command_log.append(entry)
        rt.hub.emit("operator_cmd", kind, json.dumps(params, sort_keys=True))
        self._publish()
        return 200, {"ok": True, **entry}


def replay_commands(spec, seed: Optional[int], command_log: List[dict]) -> ControlSession:
    """Re-run a scenario, applying a recorded command log at its timestamps."""
    session = ControlSession(spec, seed=seed)
    for entry in sorted(command_log, key=lambda e: (e["ts_us"], e["command_id"])):
        session.advance(entry["ts_us"])
        session.submit(entry["kind"], entry["params"])
    session.advance(spec.duration_us)
    return session


# ---------------------------------------------------------------------------
# HTTP adapter
# ---------------------------------------------------------------------------


class ControlServer:
    """Serves one ControlSession over HTTP with real-time pacing."""

    def __init__(
        self,
        session: ControlSession,
        host: str = "127.0.0.1",
        port: int = 8787,
        speed=1.0,
    ):
        self.session = session
        self.speed = speed  # sim seconds per wall second, or "max"
        self._commands: "queue.Queue[tuple]" = queue.Queue()
        self._stop = threading.Event()
        handler = _make_handler(self)
        self.httpd = ThreadingHTTPServer((host, port), handler)
        self.httpd.daemon_threads = True
        self._pacer = threading.Thread(target=self._pace, name="pacer", daemon=True)
        self._http_thread = threading.Thread(
            target=self.httpd.serve_forever, name="http", daemon=True
        )

    @property
    def address(self) -> Tuple[str, int]:
        return self.httpd.server_address[:2]

    def start(self) -> None:
        self._pacer.start()
        self._http_thread.start()

    def stop(self) -> None:
        self._stop.set()
        self.httpd.shutdown()
        self.httpd.server_close()
        self._pacer.join(timeout=5)

    def wait_finished(self, timeout: Optional[float] = None) -> bool:
        deadline = None if timeout is None else time.monotonic() + timeout
        while not self.session.finished and not self._stop.is_set():
            if deadline is not None and time.monotonic() > deadline:
                return False
            time.sleep(0.02)
        return self.session.finished

    def enqueue_command(self, kind: str, params: dict, timeout: float = 5.0) -> Tuple[int, dict]:
        """Called from HTTP handler threads; the pacer applies and answers."""
        box: List = []
        done = threading.Event()
        self._commands.put((kind, params, box, done))
        if not done.wait(timeout):
            return 503, {"error": "simulation thread did not answer in time"}
        return box[0], box[1]

    def _drain_commands(self) -> None:
        while True:
            try:
                kind, params, box, done = self._commands.get_nowait()
            except queue.Empty:
                return
            status, body = self.session.submit(kind, params)
            box[:] = [status, body]
            done.set()

    def _pace(self) -> None:
        session = self.session
        loop = session.runtime.loop
        wall_anchor = time.monotonic()
        sim_anchor = loop.now
        while not self._stop.is_set():
            self._drain_commands()
            if session.paused or session.finished:
                time.sleep(0.025)
                wall_anchor = time.monotonic()
                sim_anchor = loop.now
                continue
            if self.speed == "max":
                target = loop.now + QUANTUM_US
            else:
                elapsed = time.monotonic() - wall_anchor
                target = sim_anchor + int(elapsed * float(self.speed) * 1_000_000)
            if target <= loop.now:
                time.sleep(0.01)
                continue
            session.advance(min(target, loop.now + 60 * QUANTUM_US))


def _make_handler(server: ControlServer):
    session = server.session

    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):  # quiet by default
            pass

        def _json(self, status: int, document: dict) -> None:
            body = json.dumps(document).encode()
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.send_header("Access-Control-Allow-Origin", "*")
            self.end_headers()
            self.wfile.write(body)

        def do_GET(self) -> None:
            path, _, query = self.path.partition("?")
            if path == "/state":
                self._json(200, session.state())
                return
            if path == "/events":
                params = dict(p.split("=", 1) for p in query.split("&") if "=" in p)
                try:
                    since = int(params.get("since", "0"))
                except ValueError:
                    self._json(400, {"error": "since must be an integer"})
                    return
                if "text/event-stream" in self.headers.get("Accept", ""):
                    self._stream_events(since)
                    return
                events = session.events_since(since)
                self._json(
                    200,
                    {
                        "events": events,
                        "next": since + len(events),
                        "paused": session.paused,
                        "finished": session.finished,
                    },
                )
                return
            if path == "/commands":
                self._json(200, {"commands": session.command_log})
                return
            self._json(404, {"error": f"no such path {path!r}"})

        def do_POST(self) -> None:
            path = self.path.partition("?")[0]
            if path == "/pause":
                session.set_paused(True)
                self._json(200, {"ok": True, "paused": True})
                return
            if path == "/resume":
                session.set_paused(False)
                self._json(200, {"ok": True, "paused": False})
                return
            if path != "/command":
                self._json(404, {"error": f"no such path {path!r}"})
                return
            try:
                length = int(self.headers.get("Content-Length", "0"))
                document = json.loads(self.rfile.read(length) or b"{}")
                kind = document["kind"]
                params = document.get("params", {})
                if not isinstance(params, dict):
                    raise ValueError("params must be an object")
            except (ValueError, KeyError) as exc:
                self._json(400, {"error": f"bad command document: {exc}"})
                return
            status, body = server.enqueue_command(kind, params)
            self._json(status, body)

        def _stream_events(self, since: int) -> None:
            self.send_response(200)
            self.send_header("Content-Type", "text/event-stream")
            self.send_header("Cache-Control", "no-cache")
            self.send_header("Access-Control-Allow-Origin", "*")
            self.end_headers()
            cursor = since
            try:
                while True:
                    batch = session.events_since(cursor)
                    if not batch:
                        with session.new_event:
                            session.new_event.wait(timeout=10.0)
                        batch = session.events_since(cursor)
                    if not batch:
                        self.wfile.write(b": keepalive\n\n")
                        self.wfile.flush()
                        continue
                    for event in batch:
                        payload = json.dumps(event)
                        self.wfile.write(
                            f"id: {event['ordinal']}\ndata: {payload}\n\n".encode()
                        )
                    cursor = batch[-1]["ordinal"] + 1
                    self.wfile.flush()
            except (BrokenPipeError, ConnectionResetError):
                return

    return Handler
