"""Live control sessions: snapshots, pacing, operator commands, HTTP surface.

The operator-recovery arc (pause at the outage alert, acknowledge, close
the breaker, run to the end) executes once per module; its observations
feed most assertions.  Command replay re-runs the scenario from the
recorded log and must reproduce the session bit for bit.
"""

from __future__ import annotations

import http.client
import json
import time

import pytest

from railrange.control import ControlServer, ControlSession, replay_commands
from railrange.errors import ValidationError
from railrange.scenario import get_builtin

AS2_PAUSE_STEP = "AS2-step-9"  # outage alert reaches the operator console
NOMINAL_POWER_W = 300_000
QUANTUM_US = 1_000_000


@pytest.fixture(scope="module")
def as2_spec():
    return get_builtin("as2")


@pytest.fixture(scope="module")
def benign_spec():
    return get_builtin("benign")


def _digest_fields(session):
    """Everything a deterministic re-run must reproduce exactly."""
    state = session.state()
    return {
        "sim_time_us": state["sim_time_us"],
        "trains": state["trains"],
        "grid": state["grid"],
        "collisions": state["collisions"],
        "milestones": state["milestones"],
        "events": session.events,
        "command_log": session.command_log,
    }


@pytest.fixture(scope="module")
def recovery(as2_spec):
    """Run the AS2 operator-recovery arc once and record each step."""
    session = ControlSession(as2_spec, seed=42, pause_at=AS2_PAUSE_STEP)
    rec = {"initial": session.state()}
    session.run_to_pause()
    rec["paused"] = session.state()

    rec["ack"] = session.submit("ACK_ALERT")
    rec["ack_again"] = session.submit("ACK_ALERT")
    rec["unknown_kind"] = session.submit("OPEN_DOORS")
    rec["bad_breaker_params"] = session.submit("BREAKER_SET", {"closed": "yes"})
    rec["unknown_train"] = session.submit("TRAIN_ESTOP", {"train": "ghost99"})
    rec["breaker"] = session.submit("BREAKER_SET", {"closed": True})

    session.paused = False
    session.advance(session.runtime.loop.now + 5 * QUANTUM_US)
    rec["after_restore"] = session.state()

    train_id = rec["initial"]["trains"][0]["id"]
    rec["estop_train"] = train_id
    rec["estop"] = session.submit("TRAIN_ESTOP", {"train": train_id})

    session.advance(as2_spec.duration_us)
    rec["final"] = session.state()
    rec["digest"] = _digest_fields(session)
    rec["session"] = session
    return rec


class TestInitialState:
    def test_layout_before_start(self, recovery):
        state = recovery["initial"]
        assert state["sim_time_us"] == 0
        assert state["paused"] is False and state["finished"] is False
        assert len(state["tracks"]) == 4
        assert len(state["trains"]) == 10
        assert state["schema_version"] == "1"
        assert state["scenario"] == "as2" and state["seed"] == 42

    def test_grid_nominal_before_start(self, recovery):
        grid = recovery["initial"]["grid"]
        assert grid["breaker_closed"] is True
        assert (grid["voltage"], grid["current"], grid["power_w"]) == (750, 400, NOMINAL_POWER_W)

    def test_blocks_carry_signals(self, recovery):
        blocks = recovery["initial"]["blocks"]
        assert sum(t["blocks"] for t in recovery["initial"]["tracks"]) == len(blocks)
        assert {b["signal"] for b in blocks} <= {"red", "green"}
        occupied = [b for b in blocks if b["occupied"]]
        assert len(occupied) == 10  # one block per standing train

    def test_milestones_listed_unreached(self, recovery):
        milestones = recovery["initial"]["milestones"]
        assert len(milestones) == 12
        assert all(m["reached_us"] is None for m in milestones)

    def test_positions_within_track(self, recovery):
        for train in recovery["initial"]["trains"]:
            assert 0.0 <= train["position_pct"] < 100.0

    def test_unknown_pause_label_rejected(self, as2_spec):
        with pytest.raises(ValidationError):
            ControlSession(as2_spec, seed=42, pause_at="AS2-step-99")


class TestPauseAtAlert:
    def test_paused_on_quantum_boundary(self, recovery):
        state = recovery["paused"]
        assert state["paused"] is True
        assert state["sim_time_us"] % QUANTUM_US == 0

    def test_alert_active_and_power_lost(self, recovery):
        state = recovery["paused"]
        assert state["hmi"]["mode"] == "ALERT"
        assert state["grid"]["power_w"] == 0
        assert state["grid"]["breaker_closed"] is False

    def test_pause_milestone_reached(self, recovery):
        reached = {
            m["step_label"]: m["reached_us"] for m in recovery["paused"]["milestones"]
        }
        assert reached[AS2_PAUSE_STEP] is not None


class TestOperatorCommands:
    def test_ack_then_reack(self, recovery):
        status, body = recovery["ack"]
        assert status == 200 and body["ok"] is True and body["kind"] == "ACK_ALERT"
        status, body = recovery["ack_again"]
        assert status == 409 and "no active alert" in body["error"]

    def test_validation_failures_are_400(self, recovery):
        assert recovery["unknown_kind"][0] == 400
        assert "accepted" in recovery["unknown_kind"][1]
        assert recovery["bad_breaker_params"][0] == 400
        assert recovery["unknown_train"][0] == 400
        assert "ghost99" in recovery["unknown_train"][1]["error"]

    def test_breaker_close_restores_power(self, recovery):
        assert recovery["breaker"][0] == 200
        grid = recovery["after_restore"]["grid"]
        assert grid["breaker_closed"] is True
        assert grid["power_w"] == NOMINAL_POWER_W
        kinds = [e["kind"] for e in recovery["session"].events]
        assert "POWER_RESTORED" in kinds

    def test_estopped_train_is_stopped_at_end(self, recovery):
        final = {t["id"]: t for t in recovery["final"]["trains"]}
        assert final[recovery["estop_train"]]["speed_mps"] == 0.0

    def test_power_stays_nominal_to_the_end(self, recovery):
        # Automatic control stays halted after the alert, so the forged
        # telemetry cannot re-open the breaker once the operator closes it.
        assert recovery["final"]["grid"]["power_w"] == NOMINAL_POWER_W
        assert recovery["final"]["finished"] is True

    def test_rejected_commands_not_logged(self, recovery):
        log = recovery["session"].command_log
        assert [e["kind"] for e in log] == ["ACK_ALERT", "BREAKER_SET", "TRAIN_ESTOP"]
        assert [e["command_id"] for e in log] == [1, 2, 3]
        assert all(e["issued_by"] == "operator" for e in log)

    def test_each_command_echoed_exactly_once(self, recovery):
        echoes = [e for e in recovery["session"].events if e["kind"] == "operator_cmd"]
        assert [e["subject"] for e in echoes] == ["ACK_ALERT", "BREAKER_SET", "TRAIN_ESTOP"]


class TestModeConflicts:
    def test_breaker_during_normal_auto_409(self, benign_spec):
        session = ControlSession(benign_spec, seed=42)
        status, body = session.submit("BREAKER_SET", {"closed": False})
        assert status == 409 and "automatic control" in body["error"]

    def test_halt_unlocks_breaker(self, benign_spec):
        session = ControlSession(benign_spec, seed=42)
        assert session.submit("HALT_AUTO")[0] == 200
        assert session.submit("HALT_AUTO")[0] == 409
        assert session.submit("BREAKER_SET", {"closed": False})[0] == 200
        # The command rides the simulated network to the grid controller,
        # so its physical effect lands on the next scan quantum.
        session.advance(session.runtime.loop.now + 2 * QUANTUM_US)
        assert session.state()["grid"]["power_w"] == 0
        assert session.submit("BREAKER_SET", {"closed": True})[0] == 200
        session.advance(session.runtime.loop.now + 2 * QUANTUM_US)
        assert session.state()["grid"]["power_w"] == NOMINAL_POWER_W
        assert session.submit("RESUME_AUTO")[0] == 200
        assert session.submit("RESUME_AUTO")[0] == 409

    def test_ack_without_alert_409(self, benign_spec):
        session = ControlSession(benign_spec, seed=42)
        status, body = session.submit("ACK_ALERT")
        assert status == 409 and "no active alert" in body["error"]


class TestEventStream:
    def test_ordinals_contiguous_from_zero(self, recovery):
        events = recovery["session"].events
        assert [e["ordinal"] for e in events] == list(range(len(events)))

    def test_pagination_covers_all_without_duplicates(self, recovery):
        session = recovery["session"]
        seen, cursor = [], 0
        while True:
            page = session.events_since(cursor, limit=17)
            if not page:
                break
            seen.extend(e["ordinal"] for e in page)
            cursor = page[-1]["ordinal"] + 1
        assert seen == [e["ordinal"] for e in session.events]

    def test_timestamps_monotonic(self, recovery):
        ts = [e["ts_us"] for e in recovery["session"].events]
        assert ts == sorted(ts)

    def test_stream_excludes_attacker_telemetry(self, recovery):
        kinds = {e["kind"] for e in recovery["session"].events}
        assert "BLOCK_ENTERED" not in kinds
        assert not any(k.startswith("c2") or "beacon" in k for k in kinds)


class TestReplay:
    def test_command_log_replay_reproduces_run(self, recovery, as2_spec):
        replayed = replay_commands(as2_spec, 42, recovery["session"].command_log)
        want = json.dumps(recovery["digest"], sort_keys=True)
        got = json.dumps(_digest_fields(replayed), sort_keys=True)
        assert got == want


@pytest.fixture(scope="module")
def served(benign_spec):
    session = ControlSession(benign_spec, seed=42)
    session.set_paused(True)  # hold at t=0 until a test resumes it
    server = ControlServer(session, host="127.0.0.1", port=0, speed="max")
    server.start()
    yield server
    server.stop()


class TestHttpServer:
    """Exercises one served benign run; tests run top to bottom."""

    def _get(self, server, path, headers=None):
        host, port = server.address
        conn = http.client.HTTPConnection(host, port, timeout=10)
        conn.request("GET", path, headers=headers or {})
        resp = conn.getresponse()
        body = resp.read()
        conn.close()
        return resp.status, json.loads(body)

    def _post(self, server, path, document=None):
        host, port = server.address
        conn = http.client.HTTPConnection(host, port, timeout=10)
        payload = json.dumps(document or {}).encode()
        conn.request("POST", path, body=payload,
                     headers={"Content-Type": "application/json"})
        resp = conn.getresponse()
        body = resp.read()
        conn.close()
        return resp.status, json.loads(body)

    def test_state_at_start(self, served):
        status, state = self._get(served, "/state")
        assert status == 200
        assert state["sim_time_us"] == 0 and state["paused"] is True
        assert len(state["trains"]) == 10 and len(state["tracks"]) == 4

    def test_events_empty_before_any_activity(self, served):
        status, body = self._get(served, "/events?since=0")
        assert status == 200
        assert body["events"] == [] and body["next"] == 0 and body["paused"] is True

    def test_bad_since_is_400(self, served):
        assert self._get(served, "/events?since=x")[0] == 400

    def test_unknown_paths_404(self, served):
        assert self._get(served, "/nope")[0] == 404
        assert self._post(served, "/nope")[0] == 404

    def test_command_conflicts_over_http(self, served):
        assert self._post(served, "/command",
                          {"kind": "BREAKER_SET", "params": {"closed": False}})[0] == 409
        assert self._post(served, "/command", {"kind": "ACK_ALERT"})[0] == 409
        assert self._post(served, "/command", {"kind": "OPEN_DOORS"})[0] == 400
        status, body = self._post(served, "/command", {"params": {}})
        assert status == 400 and "bad command document" in body["error"]

    def test_accepted_command_logged_once(self, served):
        assert self._post(served, "/command", {"kind": "HALT_AUTO"})[0] == 200
        assert self._post(served, "/command", {"kind": "RESUME_AUTO"})[0] == 200
        _, listing = self._get(served, "/commands")
        kinds = [c["kind"] for c in listing["commands"]]
        assert kinds.count("HALT_AUTO") == 1 and kinds.count("RESUME_AUTO") == 1

    def test_resume_runs_to_completion(self, served):
        status, body = self._post(served, "/resume")
        assert status == 200 and body["paused"] is False
        assert served.wait_finished(timeout=60)
        _, state = self._get(served, "/state")
        assert state["finished"] is True
        assert state["sim_time_us"] == state["duration_us"]

    def test_snapshots_always_on_quantum_boundaries(self, served):
        # Published state is rebuilt only between whole scan quanta, so a
        # reader can never observe a half-applied cycle.
        _, state = self._get(served, "/state")
        assert state["sim_time_us"] % QUANTUM_US == 0
        grid = state["grid"]
        assert grid["power_w"] == grid["voltage"] * grid["current"]

    def test_event_pages_after_completion(self, served):
        collected, cursor = [], 0
        while True:
            _, body = self._get(served, f"/events?since={cursor}")
            if not body["events"]:
                break
            collected.extend(body["events"])
            cursor = body["next"]
        ordinals = [e["ordinal"] for e in collected]
        assert ordinals == list(range(len(ordinals)))
        assert any(e["kind"] == "STATION_DOCKED" for e in collected)
        assert any(e["kind"] == "operator_cmd" for e in collected)

    def test_server_push_stream_frames(self, served):
        host, port = served.address
        conn = http.client.HTTPConnection(host, port, timeout=10)
        conn.request("GET", "/events?since=0",
                     headers={"Accept": "text/event-stream"})
        resp = conn.getresponse()
        assert resp.status == 200
        assert resp.getheader("Content-Type") == "text/event-stream"
        ids, payloads = [], []
        deadline = time.monotonic() + 10
        while len(payloads) < 3 and time.monotonic() < deadline:
            line = resp.fp.readline().decode()
            if line.startswith("id: "):
                ids.append(int(line[4:].strip()))
            elif line.startswith("data: "):
                payloads.append(json.loads(line[6:]))
        conn.close()
        assert ids[:3] == [0, 1, 2]
        assert [p["ordinal"] for p in payloads] == ids[: len(payloads)]
