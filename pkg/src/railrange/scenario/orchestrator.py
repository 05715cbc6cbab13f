"""Runs one scenario: builds the plant, drives the clock, watches milestones.

``ScenarioRuntime`` wires a validated :class:`ScenarioSpec` into live objects
(event loop, network fabric, hosts, services, OT devices, physics world),
schedules the benign behavior profiles and the scripted timeline, and then
advances simulated time.  While the run progresses it:

* watches the event hub for each milestone's observable conditions and
  raises :class:`MilestoneFailure` at the first missed deadline (strict
  mode, the default) or records the miss (lenient mode, used by the live
  control server);
* records the first physics event matching the declared terminal outcome;
* captures evidence material at its planned instants — tap frames for each
  pcap vantage, per-host memory snapshots, and disk manifests — so the
  evidence packager never has to reach back into a finished run for state
  that no longer exists.

``execute`` is the one-call convenience used by the CLI and tests.
"""

from __future__ import annotations

import base64
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Callable, Dict, List, Optional, Tuple

from ..actors import (
    ActivationPlan,
    AnnounceService,
    C2Server,
    EmailService,
    FtpService,
    ImplantLabels,
    SshService,
    WebAppService,
    make_binary_activator,
    perform_action,
)
from ..errors import MilestoneFailure, ValidationError
from ..hosts import Host
from ..otdevices import (
    ConsolePoller,
    CoverEmitter,
    GridPlc,
    Hmi,
    JunctionPlc,
    Rtu,
    StationPlc,
    TrainControlPlc,
)
from ..physics import PhysicsEvent, World
from ..protocols.modbus import (
    FC_READ_COILS,
    FC_READ_HOLDING,
    FC_READ_INPUT,
    ReadBitsRequest,
    ReadRegistersRequest,
)
from ..runtime import Ctx, EventHub, GroundTruth, KeyChain, PlanView
from ..simnet import DELIVERED, EventLoop, Fabric, Frame
from .model import ScenarioSpec, TimelineEntrySpec, resolve_content

PHYSICS_TICK_US = 1_000_000

# Event kinds kept out of the packaged timeline log (high-rate movement
# telemetry that drowns the narrative; the full history stays in memory).
NOISE_EVENT_KINDS = frozenset({"BLOCK_ENTERED", "STATION_DOCKED", "STATION_DEPARTED"})


# ---------------------------------------------------------------------------
# Milestone observation
# ---------------------------------------------------------------------------


@dataclass
class _Condition:
    """One observable requirement: an event kind plus optional filters."""

    event: str
    subject: Optional[str] = None
    subject_contains: str = ""
    detail_contains: str = ""
    need: int = 1
    seen: int = 0

    def feed(self, kind: str, subject: str, detail: str) -> None:
        if kind != self.event:
            return
        if self.subject is not None and subject != self.subject:
            return
        if self.subject_contains and self.subject_contains not in subject:
            return
        if self.detail_contains and self.detail_contains not in detail:
            return
        self.seen += 1

    @property
    def met(self) -> bool:
        return self.seen >= self.need

    def describe(self) -> str:
        parts = [self.event]
        if self.subject is not None:
            parts.append(f"subject={self.subject}")
        if self.subject_contains:
            parts.append(f"subject~{self.subject_contains}")
        if self.detail_contains:
            parts.append(f"detail~{self.detail_contains}")
        if self.need > 1:
            parts.append(f"x{self.need} (seen {self.seen})")
        return " ".join(parts)


class _MilestoneWatch:
    def __init__(self, step_label: str, deadline_us: int, observe: Tuple[dict, ...]):
        self.step_label = step_label
        self.deadline_us = deadline_us
        self.conditions = [
            _Condition(
                event=o["event"],
                subject=o.get("subject"),
                subject_contains=o.get("subject_contains", ""),
                detail_contains=o.get("detail_contains", ""),
                need=int(o.get("count", 1)),
            )
            for o in observe
        ]
        self.reached_us: Optional[int] = None
        self.failed = False

    def feed(self, ts: int, kind: str, subject: str, detail: str) -> bool:
        """Returns True the moment the last open condition is satisfied."""
        if self.reached_us is not None:
            return False
        for cond in self.conditions:
            if not cond.met:
                cond.feed(kind, subject, detail)
        if all(c.met for c in self.conditions):
            self.reached_us = ts
            return True
        return False

    def missing(self) -> Tuple[str, ...]:
        return tuple(c.describe() for c in self.conditions if not c.met)


@dataclass
class MilestoneResult:
    """Outcome of one milestone after the run."""

    step_label: str
    deadline_us: int
    reached_us: Optional[int]
    missing: Tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return self.reached_us is not None and self.reached_us <= self.deadline_us


@dataclass
class RunReport:
    """Summary of one finished (or aborted) scenario run."""

    scenario: str
    seed: int
    duration_us: int
    wall_seconds: float
    milestones: List[MilestoneResult]
    outcome_name: Optional[str]
    outcome_ts_us: Optional[int]
    outcome_event: Optional[Tuple[int, str, str, str]]
    grid_power_w: int
    indicator_counts: Dict[str, int]
    events_emitted: int
    frame_stats: Dict[str, int]
    dispatched: int

    @property
    def milestones_ok(self) -> bool:
        return all(m.ok for m in self.milestones)

    @property
    def outcome_reached(self) -> bool:
        return self.outcome_name is None or self.outcome_ts_us is not None

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "seed": self.seed,
            "duration_us": self.duration_us,
            "wall_seconds": round(self.wall_seconds, 3),
            "milestones": [
                {
                    "step": m.step_label,
                    "deadline_us": m.deadline_us,
                    "reached_us": m.reached_us,
                    "ok": m.ok,
                    **({"missing": list(m.missing)} if m.missing else {}),
                }
                for m in self.milestones
            ],
            "milestones_ok": self.milestones_ok,
            "outcome": self.outcome_name,
            "outcome_ts_us": self.outcome_ts_us,
            "outcome_reached": self.outcome_reached,
            "grid_power_w": self.grid_power_w,
            "indicator_counts": dict(self.indicator_counts),
            "events_emitted": self.events_emitted,
            "frames": dict(self.frame_stats),
            "dispatched": self.dispatched,
        }


# ---------------------------------------------------------------------------
# Device construction
# ---------------------------------------------------------------------------

_READ_FC = {
    "coils": (ReadBitsRequest, FC_READ_COILS),
    "input": (ReadRegistersRequest, FC_READ_INPUT),
    "holding": (ReadRegistersRequest, FC_READ_HOLDING),
}


def _read_pdu(entry: dict):
    try:
        cls, fc = _READ_FC[entry["fc"]]
    except KeyError:
        raise ValidationError(f"console read fc must be one of {sorted(_READ_FC)}: {entry!r}")
    return cls(fc=fc, addr=int(entry["addr"]), qty=int(entry["qty"]))


# ---------------------------------------------------------------------------
# Runtime
# ---------------------------------------------------------------------------


class ScenarioRuntime:
    """One live scenario: all simulation state plus captured evidence."""

    def __init__(self, spec: ScenarioSpec, seed: Optional[int] = None, strict_milestones: bool = True):
        self.spec = spec
        self.seed = spec.seed if seed is None else int(seed)
        self.strict_milestones = strict_milestones

        epoch = datetime.strptime(spec.epoch, "%Y-%m-%dT%H:%M:%SZ").replace(tzinfo=timezone.utc)
        self.loop = EventLoop(epoch)
        self.hub = EventHub(self.loop)
        self.fabric = Fabric(self.loop)

        self._ip_of = {h.name: h.ip for h in spec.hosts}
        self._segment_of_ip = {h.ip: h.segment for h in spec.hosts}

        # Evidence capture targets (filled during the run).
        self.captures: Dict[str, List[Tuple[Frame, str]]] = {}
        self.memory_snapshots: Dict[str, dict] = {}
        self.disk_manifests: Dict[str, dict] = {}
        self.disk_artifacts: Dict[str, Dict[str, bytes]] = {}

        plan = PlanView(
            memory_hosts=set(spec.evidence.memory_hosts),
            disk_hosts=set(spec.evidence.disk_hosts),
            log_names=set(spec.evidence.log_names),
            frame_visible=self._frame_visible,
        )
        self.truth = GroundTruth(plan, self.loop)
        self.keychain = KeyChain(self.seed, spec.name)
        self.hosts: Dict[str, Host] = {}
        self.ctx = Ctx(
            loop=self.loop,
            fabric=self.fabric,
            hosts=self.hosts,
            keychain=self.keychain,
            truth=self.truth,
            hub=self.hub,
            seed=self.seed,
            scenario_id=spec.name,
        )

        self.world = self._build_world()
        self._build_network()
        self._build_hosts()
        self._build_services()
        self._build_activations()
        self.devices: Dict[str, object] = {}
        self._build_devices()
        self._open_taps()

        self._watches = [
            _MilestoneWatch(m.step_label, m.deadline_us, m.observe) for m in spec.milestones
        ]
        self.outcome_event: Optional[Tuple[int, str, str, str]] = None
        self.hub.subscribe(self._on_hub_event)

        self._schedule_profiles()
        self._schedule_timeline()
        self._schedule_deadlines()
        self._schedule_evidence_capture()
        self.loop.schedule_at(PHYSICS_TICK_US, self._physics_tick)

        self.wall_seconds = 0.0
        self.report: Optional[RunReport] = None

    # -- construction -------------------------------------------------------

    def _build_world(self) -> World:
        return World(
            layout=self.spec.layout,
            trains=self.spec.trains,
            cruise_mps=self.spec.cruise_mps,
            avoidance=self.spec.avoidance,
            clock=lambda: self.loop.now,
            sink=self._on_physics_event,
        )

    def _build_network(self) -> None:
        for seg in self.spec.segments:
            self.fabric.add_segment(seg.name, seg.cidr)
        for h in self.spec.hosts:
            self.fabric.attach_host(h.name, h.segment, h.ip)
        for rule in self.spec.rules:
            self.fabric.add_rule(rule.action, rule.src, rule.dst, dst_port=rule.port)

    def _build_hosts(self) -> None:
        for h in self.spec.hosts:
            host = Host(
                name=h.name,
                ip=h.ip,
                segment=h.segment,
                os_label=h.os,
                seed=self.seed,
                tags=h.tags,
                execute_email_attachments=h.execute_email_attachments,
                auto_run_downloads=h.auto_run_downloads,
            )
            host.boot(0)
            for service, value in h.credentials:
                host.credentials[service] = value
            for f in h.files:
                blob = resolve_content(f.content, self.seed, self._ip_of.__getitem__)
                host.write_file(0, f.path, blob)
            self.hosts[h.name] = host

    def _build_services(self) -> None:
        self.services: Dict[Tuple[str, str], object] = {}
        for h in self.spec.hosts:
            AnnounceService(self.ctx, h.name).start()
            for svc in h.services:
                self.services[(h.name, svc.kind)] = self._start_service(h.name, svc.kind, svc.params)

    def _start_service(self, host_name: str, kind: str, params: dict):
        if kind == "web":
            routes = {
                path: resolve_content(doc, self.seed, self._ip_of.__getitem__)
                for path, doc in params.get("routes", {}).items()
            }
            service: object = WebAppService(self.ctx, host_name, routes=routes)
        elif kind == "ftp":
            service = FtpService(self.ctx, host_name, share_dir=params.get("share_dir", "/srv/ftp/share"))
        elif kind == "email":
            service = EmailService(self.ctx, host_name)
        elif kind == "ssh":
            service = SshService(self.ctx, host_name)
        elif kind == "c2":
            service = C2Server(self.ctx, host_name)
            self.ctx.registry["c2"] = service
        else:
            raise ValidationError(f"unknown service kind {kind!r} on host {host_name}")
        service.start()
        return service

    def _build_activations(self) -> None:
        plans: Dict[Tuple[str, str], ActivationPlan] = {}
        for a in self.spec.activations:
            plans[(a.host, a.kind)] = ActivationPlan(
                kind=a.kind,
                labels=ImplantLabels(activate=a.activate_label, beacon=a.beacon_label or a.activate_label),
                c2_host=a.c2_host or None,
                plc_host=a.plc_host or None,
                rtu_host=a.rtu_host or None,
                train_coil=a.train_coil,
                beacon_period_us=a.beacon_period_us,
            )
        self.ctx.activate_binary = make_binary_activator(self.ctx, plans)

    def _device_sink(self, device_name: str, kind: str, detail: str) -> None:
        self.hub.emit(kind, device_name, detail)

    def _build_devices(self) -> None:
        for d in self.spec.devices:
            p = dict(d.params)
            common = dict(
                fabric=self.fabric, loop=self.loop, sink=self._device_sink
            )
            if d.kind == "train_plc":
                dev = TrainControlPlc(
                    d.name,
                    d.host,
                    world=self.world,
                    scan_period_us=p.get("scan_period_us", 1_000_000),
                    train_ids=p.get("train_ids", [t.id for t in self.spec.trains]),
                    **common,
                )
            elif d.kind == "station_plc":
                dev = StationPlc(
                    d.name, d.host, world=self.world,
                    scan_period_us=p.get("scan_period_us", 1_000_000), **common,
                )
            elif d.kind == "junction_plc":
                dev = JunctionPlc(
                    d.name, d.host, world=self.world,
                    scan_period_us=p.get("scan_period_us", 1_000_000), **common,
                )
            elif d.kind == "grid_plc":
                dev = GridPlc(
                    d.name, d.host, world=self.world,
                    scan_period_us=p.get("scan_period_us", 100_000), **common,
                )
            elif d.kind == "rtu":
                dev = Rtu(
                    d.name, d.host, world=self.world,
                    poll_period_us=p.get("poll_period_us", 1_000_000), **common,
                )
            elif d.kind == "hmi":
                dev = Hmi(
                    d.name,
                    d.host,
                    p["client_port"],
                    rtu_host=p["rtu_host"],
                    grid_plc_host=p["grid_plc_host"],
                    poll_period_us=p.get("poll_period_us", 1_000_000),
                    start_offset_us=p.get("start_offset_us", 100_000),
                    **common,
                )
            elif d.kind == "console":
                dev = ConsolePoller(
                    d.name,
                    d.host,
                    p["client_port"],
                    target_host=p["target"],
                    reads=[_read_pdu(r) for r in p.get("reads", [])],
                    period_us=p.get("period_us", 5_000_000),
                    start_offset_us=p.get("start_offset_us", 0),
                    jitter_us=p.get("jitter_us", 0),
                    seed=self.seed,
                    **common,
                )
            elif d.kind == "cover":
                dev = CoverEmitter(
                    d.name,
                    d.host,
                    target_host=p["target_host"],
                    fabric=self.fabric,
                    loop=self.loop,
                    world=self.world,
                    kind=p.get("feed", "grid"),
                    period_us=p.get("period_us", 5_000_000),
                    start_offset_us=p.get("start_offset_us", 0),
                )
            else:
                raise ValidationError(f"unknown device kind {d.kind!r}")
            dev.start()
            self.devices[d.name] = dev

    def _open_taps(self) -> None:
        for pcap in self.spec.evidence.pcaps:
            records: List[Tuple[Frame, str]] = []
            self.captures[pcap.name] = records
            self.fabric.open_tap(pcap.vantage, lambda frame, outcome, _r=records: _r.append((frame, outcome)))

    # -- evidence visibility -------------------------------------------------

    def _frame_visible(self, frame: Frame, outcome: str) -> bool:
        src_seg = self._segment_of_ip.get(frame.src_ip)
        dst_seg = self._segment_of_ip.get(frame.dst_ip)
        inter = src_seg != dst_seg
        for pcap in self.spec.evidence.pcaps:
            if pcap.vantage == "router-all":
                if inter:
                    return True
            else:
                seg = pcap.vantage[8:]
                if src_seg == seg:
                    return True
                if dst_seg == seg and inter and outcome == DELIVERED:
                    return True
        return False

    # -- scheduling ---------------------------------------------------------

    def _schedule_profiles(self) -> None:
        for profile in self.spec.profiles:
            rng = self.ctx.rng(f"profile:{profile.name}")

            def fire(p=profile, r=rng):
                perform_action(self.ctx, p.actor, p.kind, dict(p.params), origin="benign", step=None)
                delay = p.period_us
                if p.jitter_us:
                    delay += r.randint(-p.jitter_us, p.jitter_us)
                self.loop.schedule_in(max(delay, 1000), lambda: fire(p, r))

            self.loop.schedule_at(profile.start_us, lambda p=profile, r=rng: fire(p, r))

    def _schedule_timeline(self) -> None:
        for entry in self.spec.timeline:
            self.loop.schedule_at(entry.at_us, lambda e=entry: self._run_entry(e))

    def _run_entry(self, entry: TimelineEntrySpec) -> None:
        params = dict(entry.params)
        if entry.kind == "C2_TASK" and "drop" in params:
            drop = params.pop("drop")
            blob = resolve_content(drop["content"], self.seed, self._ip_of.__getitem__)
            encoded = base64.b64encode(blob).decode("ascii")
            params["command"] = f"drop {drop['path']} {encoded}"
        if "content" in params:
            blob = resolve_content(params.pop("content"), self.seed, self._ip_of.__getitem__)
            params["content_b64"] = base64.b64encode(blob).decode("ascii")
        perform_action(self.ctx, entry.actor, entry.kind, params, origin=entry.origin, step=entry.step_label)

    def _schedule_deadlines(self) -> None:
        for watch in self._watches:
            self.loop.schedule_at(watch.deadline_us, lambda w=watch: self._check_deadline(w))

    def _check_deadline(self, watch: _MilestoneWatch) -> None:
        if watch.reached_us is not None:
            return
        watch.failed = True
        detail = "; ".join(watch.missing())
        self.hub.emit("milestone_missed", watch.step_label, detail)
        if self.strict_milestones:
            raise MilestoneFailure(watch.step_label, detail)

    def _schedule_evidence_capture(self) -> None:
        ev = self.spec.evidence
        if ev.memory_hosts:
            self.loop.schedule_at(ev.memory_at_us, self._capture_memory)
        if ev.disk_hosts:
            self.loop.schedule_at(ev.disk_at_us, self._capture_disk)

    def _capture_memory(self) -> None:
        for name in self.spec.evidence.memory_hosts:
            host = self.hosts[name]
            self.memory_snapshots[name] = {
                "schema_version": "1",
                "host": name,
                "ip": host.ip,
                "os": host.os_label,
                "taken_ts_us": self.loop.now,
                "taken_at": self.loop.iso(),
                "processes": [
                    proc.as_dict() for proc in sorted(host.running_processes(), key=lambda p: p.pid)
                ],
            }

    def _capture_disk(self) -> None:
        for name in self.spec.evidence.disk_hosts:
            host = self.hosts[name]
            self.disk_manifests[name] = {
                "schema_version": "1",
                "host": name,
                "ip": host.ip,
                "taken_ts_us": self.loop.now,
                "taken_at": self.loop.iso(),
                "files": [
                    {
                        "path": path,
                        "size": len(entry.content),
                        "sha256": entry.sha256(),
                        "mtime_us": entry.mtime_us,
                    }
                    for path, entry in sorted(host.fs.items())
                ],
            }
            # Dropped-tool bytes ride along so analysts can pull the binaries
            # the manifest hashes point at.
            self.disk_artifacts[name] = {
                path: entry.content
                for path, entry in sorted(host.fs.items())
                if entry.origin == "malicious"
            }

    # -- event flow ---------------------------------------------------------

    def _on_physics_event(self, ev: PhysicsEvent) -> None:
        self.hub.emit(ev.kind, ev.subject, ev.detail)

    def _on_hub_event(self, ts: int, kind: str, subject: str, detail: str) -> None:
        for watch in self._watches:
            if watch.feed(ts, kind, subject, detail):
                self.hub.emit("milestone", watch.step_label, "reached")
        out = self.spec.outcome
        if out is not None and self.outcome_event is None and kind == out.event:
            if not out.subject_contains or out.subject_contains in f"{subject} {detail}":
                self.outcome_event = (ts, kind, subject, detail)
                self.hub.emit("outcome", out.name, f"{kind} {subject} {detail}".strip())

    def _physics_tick(self) -> None:
        self.world.step(PHYSICS_TICK_US / 1_000_000)
        self.loop.schedule_in(PHYSICS_TICK_US, self._physics_tick)

    # -- running ------------------------------------------------------------

    def advance_to(self, ts_us: int) -> None:
        """Run every event through ``ts_us`` (used by the live server)."""
        self.loop.step_until(min(ts_us, self.spec.duration_us))

    def run(self) -> RunReport:
        start = time.perf_counter()
        try:
            self.loop.step_until(self.spec.duration_us)
        finally:
            self.wall_seconds = time.perf_counter() - start
        self.report = self.build_report()
        return self.report

    def build_report(self) -> RunReport:
        counts: Dict[str, int] = {"FILESYSTEM": 0, "MEMORY": 0, "NETWORK": 0, "LOG": 0}
        for entry in self.truth.entries:
            counts[entry.cls] = counts.get(entry.cls, 0) + 1
        results = [
            MilestoneResult(
                step_label=w.step_label,
                deadline_us=w.deadline_us,
                reached_us=w.reached_us,
                missing=w.missing() if w.reached_us is None else (),
            )
            for w in self._watches
        ]
        out = self.spec.outcome
        return RunReport(
            scenario=self.spec.name,
            seed=self.seed,
            duration_us=self.spec.duration_us,
            wall_seconds=self.wall_seconds,
            milestones=results,
            outcome_name=out.name if out else None,
            outcome_ts_us=self.outcome_event[0] if self.outcome_event else None,
            outcome_event=self.outcome_event,
            grid_power_w=self.world.grid.power_w,
            indicator_counts=counts,
            events_emitted=len(self.hub.history),
            frame_stats=dict(self.fabric.stats),
            dispatched=self.loop.dispatched,
        )

    # -- evidence accessors (consumed by the packager) ----------------------

    def log_lines(self, log_name: str) -> List[str]:
        """Current contents of a named log (today: the web access log)."""
        if log_name != "web.log":
            raise ValidationError(f"unknown log name {log_name!r}")
        lines: List[str] = []
        for (_, kind), service in self.services.items():
            if kind == "web":
                lines.extend(service.log_lines)
        return lines

    def timeline_log_lines(self) -> List[str]:
        """Narrative event log for packaging, movement chatter filtered out."""
        lines = []
        for ts, kind, subject, detail in self.hub.history:
            if kind in NOISE_EVENT_KINDS:
                continue
            text = f"{self.loop.iso(ts)} {kind} {subject}"
            if detail:
                text += f" {detail}"
            lines.append(text)
        return lines


def execute(spec: ScenarioSpec, seed: Optional[int] = None, strict_milestones: bool = True) -> ScenarioRuntime:
    """Build and run a scenario to completion; returns the finished runtime."""
    runtime = ScenarioRuntime(spec, seed=seed, strict_milestones=strict_milestones)
    runtime.run()
    return runtime
