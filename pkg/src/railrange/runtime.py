"""Shared run-time plumbing: event hub, key escrow, ground-truth recording.

The orchestrator builds one Ctx per run and hands it to services, devices
and actors.  Everything in here is deterministic given the scenario seed.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Set, Tuple

from .hosts import Host
from .protocols.cipher import SessionCipher, derive_key, format_key_line
from .simnet import EventLoop, Fabric, Frame


class EventHub:
    """Fan-out for actor/device/physics events; milestones subscribe here."""

    def __init__(self, loop: EventLoop):
        self.loop = loop
        self.listeners: List[Callable[[int, str, str, str], None]] = []
        self.history: List[Tuple[int, str, str, str]] = []

    def emit(self, kind: str, subject: str, detail: str = "") -> None:
        ts = self.loop.now
        self.history.append((ts, kind, subject, detail))
        for listener in self.listeners:
            listener(ts, kind, subject, detail)

    def subscribe(self, listener: Callable[[int, str, str, str], None]) -> None:
        self.listeners.append(listener)


class KeyChain:
    """Allocates deterministic session keys and remembers them for escrow."""

    def __init__(self, seed: int, scenario_id: str):
        self.seed = seed
        self.scenario_id = scenario_id
        self._keys: Dict[str, bytes] = {}
        self._order: List[str] = []

    def new_session(self, label: str) -> Tuple[str, SessionCipher]:
        """Create (or return) the session for a stable label."""
        key_id = f"{self.scenario_id}-{label}"
        if key_id not in self._keys:
            key = derive_key(f"{self.seed}:{self.scenario_id}:session:{label}")
            self._keys[key_id] = key
            self._order.append(key_id)
        return key_id, SessionCipher(self._keys[key_id])

    def cipher_for(self, key_id: str) -> SessionCipher:
        """Cipher for an already-established session (KeyError if unknown)."""
        return SessionCipher(self._keys[key_id])

    def keyring(self) -> Dict[str, bytes]:
        return dict(self._keys)

    def escrow_lines(self) -> List[str]:
        return [format_key_line(kid, self._keys[kid]) for kid in self._order]


@dataclass
class TruthEntry:
    """One planted observable that the packaged evidence will contain."""

    step_label: str
    cls: str  # FILESYSTEM | MEMORY | NETWORK | LOG
    description: str
    locator: dict
    first_ts_us: int
    count: int = 1


@dataclass
class PlanView:
    """What the evidence plan will actually collect (recorder's filter)."""

    memory_hosts: Set[str] = field(default_factory=set)
    disk_hosts: Set[str] = field(default_factory=set)
    log_names: Set[str] = field(default_factory=set)
    # returns True when at least one planned pcap vantage captures the frame
    frame_visible: Callable[[Frame, str], bool] = lambda frame, outcome: False


class GroundTruth:
    """Records planted indicators, filtered to what evidence will contain."""

    def __init__(self, plan: PlanView, loop: EventLoop):
        self.plan = plan
        self.loop = loop
        self.entries: List[TruthEntry] = []
        self.skipped: List[Tuple[str, str, str]] = []  # (step, cls, why)
        self._loops: Dict[str, TruthEntry] = {}
        self.steps_recorded: Dict[str, int] = {}

    def _add(self, entry: TruthEntry) -> None:
        self.entries.append(entry)
        base = entry.step_label.split(":", 1)[0]
        self.steps_recorded[base] = self.steps_recorded.get(base, 0) + 1

    def _skip(self, step: str, cls: str, why: str) -> None:
        self.skipped.append((step, cls, why))

    def file(self, step: str, host: Host, path: str, description: str) -> None:
        if host.name not in self.plan.disk_hosts:
            self._skip(step, "FILESYSTEM", f"{host.name} disk not collected")
            return
        entry = host.fs[path]
        self._add(
            TruthEntry(
                step_label=step,
                cls="FILESYSTEM",
                description=description,
                locator={
                    "kind": "file",
                    "host": host.name,
                    "path": path,
                    "sha256": entry.sha256(),
                },
                first_ts_us=self.loop.now,
            )
        )

    def memory(
        self, step: str, host_name: str, pid: int, field_name: str, match: str, description: str
    ) -> None:
        if host_name not in self.plan.memory_hosts:
            self._skip(step, "MEMORY", f"{host_name} memory not collected")
            return
        self._add(
            TruthEntry(
                step_label=step,
                cls="MEMORY",
                description=description,
                locator={
                    "kind": "memory",
                    "host": host_name,
                    "pid": pid,
                    "field": field_name,  # process | cmdline | module | socket
                    "match": match,
                },
                first_ts_us=self.loop.now,
            )
        )

    def frame(
        self,
        step: str,
        frame: Frame,
        outcome: str,
        description: str,
        loop_key: Optional[str] = None,
    ) -> None:
        """Record a malicious frame; `loop_key` aggregates repeating traffic."""
        if loop_key is not None and loop_key in self._loops:
            self._loops[loop_key].count += 1
            return
        if not self.plan.frame_visible(frame, outcome):
            self._skip(step, "NETWORK", f"flow {frame.flow_id} not on a planned vantage")
            return
        entry = TruthEntry(
            step_label=step,
            cls="NETWORK",
            description=description,
            locator={
                "kind": "frame",
                "flow_id": frame.flow_id,
                "payload_sha256": hashlib.sha256(frame.payload).hexdigest(),
            },
            first_ts_us=self.loop.now,
        )
        self._add(entry)
        if loop_key is not None:
            self._loops[loop_key] = entry

    def log(self, step: str, log_name: str, match: str, description: str) -> None:
        if log_name not in self.plan.log_names:
            self._skip(step, "LOG", f"{log_name} not collected")
            return
        self._add(
            TruthEntry(
                step_label=step,
                cls="LOG",
                description=description,
                locator={"kind": "log", "name": log_name, "match": match},
                first_ts_us=self.loop.now,
            )
        )


def stable_blob(seed: int, tag: str, size: int, printable: bool = False) -> bytes:
    """Deterministic filler bytes (keystroke logs, screenshots, binaries)."""
    rng = random.Random(f"{seed}:{tag}")
    if printable:
        words = (
            "meeting", "schedule", "depot", "shift", "track", "report",
            "invoice", "password", "timetable", "maintenance", "signal",
        )
        parts: List[str] = []
        length = 0
        while length < size:
            w = rng.choice(words)
            parts.append(w)
            length += len(w) + 1
        text = " ".join(parts)[:size]
        return text.encode("ascii")
    return bytes(rng.getrandbits(8) for _ in range(size))


@dataclass
class Ctx:
    """Everything an actor or service needs to act inside one run."""

    loop: EventLoop
    fabric: Fabric
    hosts: Dict[str, Host]
    keychain: KeyChain
    truth: GroundTruth
    hub: EventHub
    seed: int
    scenario_id: str
    registry: Dict[str, object] = field(default_factory=dict)
    # set by the orchestrator: runs a binary dropped on a host (dispatches on
    # the file's embedded marker, e.g. spawning an implant runtime)
    activate_binary: Callable[[str, str, str], None] = lambda host, path, parent: None
    # starts above the per-host ephemeral range so the two never collide
    _port_counter: int = 52000

    def rng(self, tag: str) -> random.Random:
        return random.Random(f"{self.seed}:{self.scenario_id}:{tag}")

    def next_client_port(self) -> int:
        self._port_counter += 1
        return self._port_counter

    def host(self, name: str) -> Host:
        return self.hosts[name]
