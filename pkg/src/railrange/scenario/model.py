"""Scenario document model: typed spec, JSON round-trip, and validation.

A scenario is one JSON document (``schema_version`` "1") describing network
segments, hosts (with services, traits and seeded files), ordered firewall
rules, the physical layout, OT device bindings, malware activation wiring,
benign behavior profiles, the attack timeline, observation-based milestones,
and the evidence collection plan.  ``load_spec`` validates shape against the
published JSON schema and then cross-checks every reference; the result is a
``ScenarioSpec`` that round-trips through ``to_document`` unchanged.

Time fields are integer microseconds relative to ``epoch`` (an ISO-8601
instant).  Seeded file contents are declared, not embedded: a ``content``
object names either literal text/base64, a deterministic filler blob, or one
of the tool builders, so the same document yields byte-identical runs for a
given seed.
"""

from __future__ import annotations

import base64
import ipaddress
import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Callable, Dict, List, Optional, Tuple

import jsonschema

from ..actors import fci_binary, fdi_script, trojan_binary, webshell_script
from ..errors import DanglingReference, SchemaError, TimelineOverflow, ValidationError
from ..physics import JunctionSpec, LayoutSpec, StationSpec, TrackSpec, TrainSpec
from ..runtime import stable_blob

SCHEMA_VERSION = "1"

ACTION_KINDS = (
    "SEND_EMAIL",
    "BROWSE",
    "FILE_SHARE_SYNC",
    "RUN_COMMAND",
    "UPLOAD_FILE",
    "FTP_STOR",
    "WEBSHELL_EXEC",
    "C2_TASK",
    "C2_BEACON",
    "REMOTE_COPY",
    "REMOTE_EXEC",
    "FCI_RUN",
    "FDI_RUN",
)
DEVICE_KINDS = (
    "train_plc",
    "station_plc",
    "junction_plc",
    "grid_plc",
    "rtu",
    "hmi",
    "console",
    "cover",
)
SERVICE_KINDS = ("web", "ftp", "email", "ssh", "announce", "c2")
ACTIVATION_KINDS = ("spytrojan", "fcimodule", "s7fdi")
CLIENT_DEVICE_KINDS = ("hmi", "console")

_BUILTIN_NAMES = ("as1", "as2", "benign")


def builtin_names() -> Tuple[str, ...]:
    return _BUILTIN_NAMES


# ---------------------------------------------------------------------------
# Spec dataclasses
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SegmentSpec:
    name: str
    cidr: str


@dataclass(frozen=True)
class FileSpec:
    """A file seeded onto a host before the run starts."""

    path: str
    content: dict  # content object, see resolve_content()
    origin: str = "benign"

    def __post_init__(self):
        object.__setattr__(self, "content", dict(self.content))

    def __hash__(self):
        return hash((self.path, self.origin))


@dataclass(frozen=True)
class ServiceSpec:
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "params", dict(self.params))

    def __hash__(self):
        return hash(self.kind)


@dataclass(frozen=True)
class HostSpec:
    name: str
    segment: str
    ip: str
    os: str = "windows"
    tags: Tuple[str, ...] = ()
    credentials: Tuple[Tuple[str, str], ...] = ()  # (service, "user:password")
    execute_email_attachments: bool = False
    auto_run_downloads: bool = False
    services: Tuple[ServiceSpec, ...] = ()
    files: Tuple[FileSpec, ...] = ()


@dataclass(frozen=True)
class RuleSpec:
    action: str  # ALLOW | DENY
    src: str
    dst: str
    port: Optional[int] = None  # None = any destination port


@dataclass(frozen=True)
class DeviceSpec:
    name: str
    kind: str
    host: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "params", dict(self.params))

    def __hash__(self):
        return hash((self.name, self.kind, self.host))


@dataclass(frozen=True)
class ActivationSpec:
    """How a dropped tool binary comes alive on a host."""

    host: str
    kind: str  # spytrojan | fcimodule | s7fdi
    activate_label: str
    beacon_label: str = ""
    c2_host: str = ""
    plc_host: str = ""
    rtu_host: str = ""
    train_coil: int = 101
    beacon_period_us: int = 30_000_000


@dataclass(frozen=True)
class ProfileSpec:
    """A repeating benign behavior."""

    name: str
    actor: str
    kind: str  # an ACTION_KIND
    start_us: int
    period_us: int
    params: dict = field(default_factory=dict)
    jitter_us: int = 0

    def __post_init__(self):
        object.__setattr__(self, "params", dict(self.params))

    def __hash__(self):
        return hash(self.name)


@dataclass(frozen=True)
class TimelineEntrySpec:
    """One scripted action.  Labels suffix a base step with ':detail'."""

    step_label: str
    at_us: int
    actor: str
    kind: str
    params: dict = field(default_factory=dict)
    origin: str = "malicious"

    def __post_init__(self):
        object.__setattr__(self, "params", dict(self.params))

    def __hash__(self):
        return hash(self.step_label)

    @property
    def base_label(self) -> str:
        return self.step_label.split(":", 1)[0]


@dataclass(frozen=True)
class MilestoneSpec:
    """An observable effect with a deadline; all conditions must be seen."""

    step_label: str
    deadline_us: int
    observe: Tuple[dict, ...]  # {event, subject?, subject_contains?, detail_contains?, count?}

    def __post_init__(self):
        object.__setattr__(self, "observe", tuple(dict(o) for o in self.observe))

    def __hash__(self):
        return hash(self.step_label)


@dataclass(frozen=True)
class PcapSpec:
    name: str  # file stem, e.g. "router" -> network/router.pcap
    vantage: str  # "router-all" | "segment:<name>"


@dataclass(frozen=True)
class EvidenceSpec:
    pcaps: Tuple[PcapSpec, ...] = ()
    memory_hosts: Tuple[str, ...] = ()
    memory_at_us: int = 0
    disk_hosts: Tuple[str, ...] = ()
    disk_at_us: int = 0
    log_names: Tuple[str, ...] = ()
    key_log: bool = False


@dataclass(frozen=True)
class OutcomeSpec:
    """Terminal physical outcome the run is expected to reach."""

    name: str  # e.g. COLLISION | POWER_ZERO
    event: str  # physics event kind that marks it
    subject_contains: str = ""


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    title: str
    epoch: str  # ISO-8601, e.g. "2024-04-03T00:00:00Z"
    duration_us: int
    seed: int = 42
    segments: Tuple[SegmentSpec, ...] = ()
    hosts: Tuple[HostSpec, ...] = ()
    rules: Tuple[RuleSpec, ...] = ()
    layout: Optional[LayoutSpec] = None
    trains: Tuple[TrainSpec, ...] = ()
    cruise_mps: float = 14.0
    avoidance: str = "external"
    devices: Tuple[DeviceSpec, ...] = ()
    activations: Tuple[ActivationSpec, ...] = ()
    profiles: Tuple[ProfileSpec, ...] = ()
    timeline: Tuple[TimelineEntrySpec, ...] = ()
    milestones: Tuple[MilestoneSpec, ...] = ()
    evidence: EvidenceSpec = field(default_factory=EvidenceSpec)
    outcome: Optional[OutcomeSpec] = None

    def host(self, name: str) -> HostSpec:
        for h in self.hosts:
            if h.name == name:
                return h
        raise KeyError(name)

    def milestone_labels(self) -> Tuple[str, ...]:
        return tuple(m.step_label for m in self.milestones)


# ---------------------------------------------------------------------------
# Content resolution
# ---------------------------------------------------------------------------


def resolve_content(content: dict, seed: int, ip_of: Callable[[str], str]) -> bytes:
    """Turn a declarative content object into bytes.

    Forms::

        {"text": "..."}                          literal UTF-8
        {"b64": "..."}                           literal bytes, base64
        {"blob": tag, "size": n, "printable":?}  deterministic filler
        {"builder": "spytrojan", "display_name": n}
        {"builder": "fcimodule"}
        {"builder": "s7fdi", "rtu_host": h, "values": [v, a]}
        {"builder": "webshell"}

    plus ``"encode": "b64"`` to base64-wrap the result (used for web-shell
    uploads whose request body is itself base64 text).
    """
    if "text" in content:
        data = content["text"].encode("utf-8")
    elif "b64" in content:
        data = base64.b64decode(content["b64"].encode())
    elif "blob" in content:
        data = stable_blob(
            seed, content["blob"], int(content["size"]), bool(content.get("printable", False))
        )
    elif "builder" in content:
        builder = content["builder"]
        if builder == "spytrojan":
            data = trojan_binary(seed, content["display_name"])
        elif builder == "fcimodule":
            data = fci_binary(seed)
        elif builder == "s7fdi":
            data = fdi_script(ip_of(content["rtu_host"]), tuple(content.get("values", (990, 410))))
        elif builder == "webshell":
            data = webshell_script()
        else:
            raise ValidationError(f"unknown content builder {builder!r}")
    else:
        raise ValidationError(f"content object has no recognized form: {sorted(content)}")
    if content.get("encode") == "b64":
        data = base64.b64encode(data)
    return data


def _check_content(content: dict, where: str, host_names: set) -> None:
    forms = [k for k in ("text", "b64", "blob", "builder") if k in content]
    if len(forms) != 1:
        raise ValidationError(f"{where}: content must have exactly one form, got {forms}")
    if content.get("builder") == "s7fdi":
        rtu = content.get("rtu_host", "")
        if rtu not in host_names:
            raise DanglingReference(f"{where}: content builder names unknown host {rtu!r}")
    if content.get("builder") == "spytrojan" and "display_name" not in content:
        raise ValidationError(f"{where}: spytrojan content needs display_name")
    if "blob" in content and "size" not in content:
        raise ValidationError(f"{where}: blob content needs size")


# ---------------------------------------------------------------------------
# Document -> spec
# ---------------------------------------------------------------------------


_schema_cache: Optional[dict] = None


def _schema() -> dict:
    global _schema_cache
    if _schema_cache is None:
        text = resources.files("railrange.scenario").joinpath("schema.json").read_text()
        _schema_cache = json.loads(text)
    return _schema_cache


def load_file(path: str) -> ScenarioSpec:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            document = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: not valid JSON: {exc}") from exc
    return load_spec(document)


def load_spec(document: dict) -> ScenarioSpec:
    """Validate a scenario document and build the typed spec."""
    if not isinstance(document, dict):
        raise SchemaError(f"scenario document must be an object, got {type(document).__name__}")
    try:
        jsonschema.validate(document, _schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "(top level)"
        raise SchemaError(f"at {where}: {exc.message}") from exc
    if document["schema_version"] != SCHEMA_VERSION:
        raise SchemaError(
            f"unsupported schema_version {document['schema_version']!r}"
            f" (this build reads {SCHEMA_VERSION!r})"
        )
    spec = _build_spec(document)
    _validate_semantics(spec)
    return spec


def _build_spec(doc: dict) -> ScenarioSpec:
    layout_doc = doc["layout"]
    layout = LayoutSpec(
        tracks=tuple(
            TrackSpec(id=t["id"], blocks=t["blocks"], block_m=float(t.get("block_m", 200.0)))
            for t in layout_doc["tracks"]
        ),
        stations=tuple(
            StationSpec(track=s["track"], block=s["block"], dwell_s=float(s.get("dwell_s", 20.0)))
            for s in layout_doc.get("stations", ())
        ),
        junctions=tuple(
            JunctionSpec(a=j["a"], b=j["b"]) for j in layout_doc.get("junctions", ())
        ),
    )
    trains = tuple(
        TrainSpec(
            id=t["id"], track=t["track"], block=t["block"], offset_m=float(t.get("offset_m", 0.0))
        )
        for t in layout_doc["trains"]
    )
    ev = doc.get("evidence", {})
    evidence = EvidenceSpec(
        pcaps=tuple(PcapSpec(name=p["name"], vantage=p["vantage"]) for p in ev.get("pcaps", ())),
        memory_hosts=tuple(ev.get("memory_hosts", ())),
        memory_at_us=int(ev.get("memory_at_us", 0)),
        disk_hosts=tuple(ev.get("disk_hosts", ())),
        disk_at_us=int(ev.get("disk_at_us", 0)),
        log_names=tuple(ev.get("log_names", ())),
        key_log=bool(ev.get("key_log", False)),
    )
    outcome = None
    if "outcome" in doc:
        o = doc["outcome"]
        outcome = OutcomeSpec(
            name=o["name"], event=o["event"], subject_contains=o.get("subject_contains", "")
        )
    return ScenarioSpec(
        name=doc["name"],
        title=doc.get("title", doc["name"]),
        epoch=doc["epoch"],
        duration_us=int(doc["duration_us"]),
        seed=int(doc.get("seed", 42)),
        segments=tuple(SegmentSpec(name=s["name"], cidr=s["cidr"]) for s in doc["segments"]),
        hosts=tuple(
            HostSpec(
                name=h["name"],
                segment=h["segment"],
                ip=h["ip"],
                os=h.get("os", "windows"),
                tags=tuple(h.get("tags", ())),
                credentials=tuple(
                    (c["service"], c["value"]) for c in h.get("credentials", ())
                ),
                execute_email_attachments=bool(h.get("execute_email_attachments", False)),
                auto_run_downloads=bool(h.get("auto_run_downloads", False)),
                services=tuple(
                    ServiceSpec(kind=s["kind"], params=s.get("params", {}))
                    for s in h.get("services", ())
                ),
                files=tuple(
                    FileSpec(
                        path=f["path"], content=f["content"], origin=f.get("origin", "benign")
                    )
                    for f in h.get("files", ())
                ),
            )
            for h in doc["hosts"]
        ),
        rules=tuple(
            RuleSpec(action=r["action"], src=r["src"], dst=r["dst"], port=r.get("port"))
            for r in doc["rules"]
        ),
        layout=layout,
        trains=trains,
        cruise_mps=float(layout_doc.get("cruise_mps", 14.0)),
        avoidance=layout_doc.get("avoidance", "external"),
        devices=tuple(
            DeviceSpec(
                name=d["name"], kind=d["kind"], host=d["host"], params=d.get("params", {})
            )
            for d in doc.get("devices", ())
        ),
        activations=tuple(
            ActivationSpec(
                host=a["host"],
                kind=a["kind"],
                activate_label=a["activate_label"],
                beacon_label=a.get("beacon_label", ""),
                c2_host=a.get("c2_host", ""),
                plc_host=a.get("plc_host", ""),
                rtu_host=a.get("rtu_host", ""),
                train_coil=int(a.get("train_coil", 101)),
                beacon_period_us=int(a.get("beacon_period_us", 30_000_000)),
            )
            for a in doc.get("activations", ())
        ),
        profiles=tuple(
            ProfileSpec(
                name=p["name"],
                actor=p["actor"],
                kind=p["kind"],
                start_us=int(p["start_us"]),
                period_us=int(p["period_us"]),
                params=p.get("params", {}),
                jitter_us=int(p.get("jitter_us", 0)),
            )
            for p in doc.get("profiles", ())
        ),
        timeline=tuple(
            TimelineEntrySpec(
                step_label=e["step_label"],
                at_us=int(e["at_us"]),
                actor=e["actor"],
                kind=e["kind"],
                params=e.get("params", {}),
                origin=e.get("origin", "malicious"),
            )
            for e in doc.get("timeline", ())
        ),
        milestones=tuple(
            MilestoneSpec(
                step_label=m["step_label"],
                deadline_us=int(m["deadline_us"]),
                observe=tuple(m["observe"]),
            )
            for m in doc.get("milestones", ())
        ),
        evidence=evidence,
        outcome=outcome,
    )


# ---------------------------------------------------------------------------
# Spec -> document
# ---------------------------------------------------------------------------


def to_document(spec: ScenarioSpec) -> dict:
    """Serialize a spec back to its JSON document form (round-trips)."""
    doc: dict = {
        "schema_version": SCHEMA_VERSION,
        "name": spec.name,
        "title": spec.title,
        "epoch": spec.epoch,
        "duration_us": spec.duration_us,
        "seed": spec.seed,
        "segments": [{"name": s.name, "cidr": s.cidr} for s in spec.segments],
        "hosts": [_host_doc(h) for h in spec.hosts],
        "rules": [
            {"action": r.action, "src": r.src, "dst": r.dst}
            | ({"port": r.port} if r.port is not None else {})
            for r in spec.rules
        ],
        "layout": _layout_doc(spec),
        "devices": [
            {"name": d.name, "kind": d.kind, "host": d.host}
            | ({"params": d.params} if d.params else {})
            for d in spec.devices
        ],
        "activations": [_activation_doc(a) for a in spec.activations],
        "profiles": [
            {
                "name": p.name,
                "actor": p.actor,
                "kind": p.kind,
                "start_us": p.start_us,
                "period_us": p.period_us,
            }
            | ({"params": p.params} if p.params else {})
            | ({"jitter_us": p.jitter_us} if p.jitter_us else {})
            for p in spec.profiles
        ],
        "timeline": [
            {
                "step_label": e.step_label,
                "at_us": e.at_us,
                "actor": e.actor,
                "kind": e.kind,
            }
            | ({"params": e.params} if e.params else {})
            | ({"origin": e.origin} if e.origin != "malicious" else {})
            for e in spec.timeline
        ],
        "milestones": [
            {
                "step_label": m.step_label,
                "deadline_us": m.deadline_us,
                "observe": [dict(o) for o in m.observe],
            }
            for m in spec.milestones
        ],
        "evidence": _evidence_doc(spec.evidence),
    }
    if spec.outcome is not None:
        out = {"name": spec.outcome.name, "event": spec.outcome.event}
        if spec.outcome.subject_contains:
            out["subject_contains"] = spec.outcome.subject_contains
        doc["outcome"] = out
    return doc


def _host_doc(h: HostSpec) -> dict:
    doc: dict = {"name": h.name, "segment": h.segment, "ip": h.ip, "os": h.os}
    if h.tags:
        doc["tags"] = list(h.tags)
    if h.credentials:
        doc["credentials"] = [{"service": s, "value": v} for s, v in h.credentials]
    if h.execute_email_attachments:
        doc["execute_email_attachments"] = True
    if h.auto_run_downloads:
        doc["auto_run_downloads"] = True
    if h.services:
        doc["services"] = [
            {"kind": s.kind} | ({"params": s.params} if s.params else {}) for s in h.services
        ]
    if h.files:
        doc["files"] = [
            {"path": f.path, "content": f.content}
            | ({"origin": f.origin} if f.origin != "benign" else {})
            for f in h.files
        ]
    return doc


def _layout_doc(spec: ScenarioSpec) -> dict:
    lay = spec.layout
    doc: dict = {
        "tracks": [{"id": t.id, "blocks": t.blocks, "block_m": t.block_m} for t in lay.tracks],
        "trains": [
            {"id": t.id, "track": t.track, "block": t.block, "offset_m": t.offset_m}
            for t in spec.trains
        ],
        "cruise_mps": spec.cruise_mps,
        "avoidance": spec.avoidance,
    }
    if lay.stations:
        doc["stations"] = [
            {"track": s.track, "block": s.block, "dwell_s": s.dwell_s} for s in lay.stations
        ]
    if lay.junctions:
        doc["junctions"] = [{"a": j.a, "b": j.b} for j in lay.junctions]
    return doc


def _activation_doc(a: ActivationSpec) -> dict:
    doc: dict = {"host": a.host, "kind": a.kind, "activate_label": a.activate_label}
    if a.beacon_label:
        doc["beacon_label"] = a.beacon_label
    if a.c2_host:
        doc["c2_host"] = a.c2_host
    if a.plc_host:
        doc["plc_host"] = a.plc_host
    if a.rtu_host:
        doc["rtu_host"] = a.rtu_host
    if a.train_coil != 101:
        doc["train_coil"] = a.train_coil
    if a.beacon_period_us != 30_000_000:
        doc["beacon_period_us"] = a.beacon_period_us
    return doc


def _evidence_doc(ev: EvidenceSpec) -> dict:
    doc: dict = {
        "pcaps": [{"name": p.name, "vantage": p.vantage} for p in ev.pcaps],
    }
    if ev.memory_hosts:
        doc["memory_hosts"] = list(ev.memory_hosts)
        doc["memory_at_us"] = ev.memory_at_us
    if ev.disk_hosts:
        doc["disk_hosts"] = list(ev.disk_hosts)
        doc["disk_at_us"] = ev.disk_at_us
    if ev.log_names:
        doc["log_names"] = list(ev.log_names)
    if ev.key_log:
        doc["key_log"] = True
    return doc


# ---------------------------------------------------------------------------
# Semantic validation
# ---------------------------------------------------------------------------


def _validate_semantics(spec: ScenarioSpec) -> None:
    _validate_topology(spec)
    _validate_layout(spec)
    _validate_devices(spec)
    _validate_activations(spec)
    _validate_schedule(spec)
    _validate_evidence(spec)
    _validate_preconditions(spec)


def _validate_topology(spec: ScenarioSpec) -> None:
    seg_names = [s.name for s in spec.segments]
    if len(set(seg_names)) != len(seg_names):
        raise ValidationError("duplicate segment names")
    networks = {}
    for s in spec.segments:
        try:
            networks[s.name] = ipaddress.ip_network(s.cidr)
        except ValueError as exc:
            raise ValidationError(f"segment {s.name}: bad cidr {s.cidr!r}: {exc}") from exc
    host_names = [h.name for h in spec.hosts]
    if len(set(host_names)) != len(host_names):
        raise ValidationError("duplicate host names")
    ips = [h.ip for h in spec.hosts]
    if len(set(ips)) != len(ips):
        raise ValidationError("duplicate host addresses")
    for h in spec.hosts:
        if h.segment not in networks:
            raise DanglingReference(f"host {h.name}: unknown segment {h.segment!r}")
        try:
            addr = ipaddress.ip_address(h.ip)
        except ValueError as exc:
            raise ValidationError(f"host {h.name}: bad address {h.ip!r}") from exc
        if addr not in networks[h.segment]:
            raise ValidationError(
                f"host {h.name}: address {h.ip} outside segment {h.segment}"
                f" ({networks[h.segment]})"
            )
        for f in h.files:
            _check_content(f.content, f"host {h.name} file {f.path}", set(host_names))
    for i, r in enumerate(spec.rules):
        for seg in (r.src, r.dst):
            if seg not in networks:
                raise DanglingReference(f"rule {i}: unknown segment {seg!r}")


def _validate_layout(spec: ScenarioSpec) -> None:
    lay = spec.layout
    if lay is None or not lay.tracks:
        raise ValidationError("layout needs at least one track")
    tracks = {t.id: t for t in lay.tracks}
    if len(tracks) != len(lay.tracks):
        raise ValidationError("duplicate track ids")
    for s in lay.stations:
        if s.track not in tracks:
            raise DanglingReference(f"station on unknown track {s.track!r}")
        if not 0 <= s.block < tracks[s.track].blocks:
            raise ValidationError(f"station block {s.block} outside track {s.track}")
    for j in lay.junctions:
        for block_ref in (j.a, j.b):
            track_id, _, idx = block_ref.rpartition("-B")
            if track_id not in tracks or not idx.isdigit():
                raise DanglingReference(f"junction references unknown block {block_ref!r}")
            if int(idx) >= tracks[track_id].blocks:
                raise ValidationError(f"junction block {block_ref} outside track")
    train_ids = [t.id for t in spec.trains]
    if len(set(train_ids)) != len(train_ids):
        raise ValidationError("duplicate train ids")
    for t in spec.trains:
        if t.track not in tracks:
            raise DanglingReference(f"train {t.id} on unknown track {t.track!r}")
        if not 0 <= t.block < tracks[t.track].blocks:
            raise ValidationError(f"train {t.id} starts in bad block {t.block}")


def _validate_devices(spec: ScenarioSpec) -> None:
    host_names = {h.name for h in spec.hosts}
    names = [d.name for d in spec.devices]
    if len(set(names)) != len(names):
        raise ValidationError("duplicate device names")
    for d in spec.devices:
        if d.host not in host_names:
            raise DanglingReference(f"device {d.name}: unknown host {d.host!r}")
        if d.kind in CLIENT_DEVICE_KINDS and "client_port" not in d.params:
            raise ValidationError(f"device {d.name}: {d.kind} needs params.client_port")
        for key in ("target", "rtu_host", "grid_plc_host", "target_host"):
            ref = d.params.get(key)
            if ref is not None and ref not in host_names:
                raise DanglingReference(f"device {d.name}: params.{key} unknown host {ref!r}")


def _validate_activations(spec: ScenarioSpec) -> None:
    host_names = {h.name for h in spec.hosts}
    milestone_bases = set(spec.milestone_labels())
    seen = set()
    for a in spec.activations:
        if (a.host, a.kind) in seen:
            raise ValidationError(f"duplicate activation for ({a.host}, {a.kind})")
        seen.add((a.host, a.kind))
        if a.host not in host_names:
            raise DanglingReference(f"activation on unknown host {a.host!r}")
        for ref in (a.c2_host, a.plc_host, a.rtu_host):
            if ref and ref not in host_names:
                raise DanglingReference(f"activation on {a.host}: unknown host {ref!r}")
        for label in (a.activate_label, a.beacon_label):
            if label and label.split(":", 1)[0] not in milestone_bases:
                raise DanglingReference(
                    f"activation on {a.host}: label {label!r} has no milestone"
                )
        if a.kind == "spytrojan" and not a.c2_host:
            raise ValidationError(f"spytrojan activation on {a.host} needs c2_host")
        if a.kind == "fcimodule" and not (a.c2_host and a.plc_host):
            raise ValidationError(f"fcimodule activation on {a.host} needs c2_host and plc_host")
        if a.kind == "s7fdi" and not a.rtu_host:
            raise ValidationError(f"s7fdi activation on {a.host} needs rtu_host")


def _validate_schedule(spec: ScenarioSpec) -> None:
    host_names = {h.name for h in spec.hosts}
    for p in spec.profiles:
        if p.actor not in host_names:
            raise DanglingReference(f"profile {p.name}: unknown actor {p.actor!r}")
        if p.period_us < 1000:
            raise ValidationError(f"profile {p.name}: period under 1 ms")
        if p.start_us > spec.duration_us:
            raise TimelineOverflow(f"profile {p.name} starts after the scenario ends")
    labels = [e.step_label for e in spec.timeline]
    if len(set(labels)) != len(labels):
        raise ValidationError("duplicate timeline step labels")
    milestone_bases = set(spec.milestone_labels())
    for e in spec.timeline:
        if e.at_us > spec.duration_us:
            raise TimelineOverflow(
                f"timeline entry {e.step_label} at {e.at_us} µs is past the"
                f" {spec.duration_us} µs duration"
            )
        if e.actor not in host_names:
            raise DanglingReference(f"timeline entry {e.step_label}: unknown actor {e.actor!r}")
        if milestone_bases and e.base_label not in milestone_bases:
            raise DanglingReference(
                f"timeline entry {e.step_label}: no milestone for base {e.base_label!r}"
            )
        _check_entry_content(e, host_names)
    mlabels = list(spec.milestone_labels())
    if len(set(mlabels)) != len(mlabels):
        raise ValidationError("duplicate milestone labels")
    for m in spec.milestones:
        if m.deadline_us > spec.duration_us:
            raise TimelineOverflow(f"milestone {m.step_label} deadline past the duration")
        if not m.observe:
            raise ValidationError(f"milestone {m.step_label} observes nothing")


def _check_entry_content(e: TimelineEntrySpec, host_names: set) -> None:
    content = e.params.get("content")
    if isinstance(content, dict):
        _check_content(content, f"timeline entry {e.step_label}", host_names)
    drop = e.params.get("drop")
    if isinstance(drop, dict) and isinstance(drop.get("content"), dict):
        _check_content(drop["content"], f"timeline entry {e.step_label} drop", host_names)


def _validate_evidence(spec: ScenarioSpec) -> None:
    ev = spec.evidence
    host_names = {h.name for h in spec.hosts}
    seg_names = {s.name for s in spec.segments}
    stems = [p.name for p in ev.pcaps]
    if len(set(stems)) != len(stems):
        raise ValidationError("duplicate pcap names")
    for p in ev.pcaps:
        if p.vantage != "router-all":
            if not p.vantage.startswith("segment:") or p.vantage[8:] not in seg_names:
                raise DanglingReference(f"pcap {p.name}: unknown vantage {p.vantage!r}")
    for host in (*ev.memory_hosts, *ev.disk_hosts):
        if host not in host_names:
            raise DanglingReference(f"evidence plan names unknown host {host!r}")
    for at, what in ((ev.memory_at_us, "memory"), (ev.disk_at_us, "disk")):
        if at > spec.duration_us:
            raise TimelineOverflow(f"{what} capture scheduled past the duration")


def _validate_preconditions(spec: ScenarioSpec) -> None:
    """The timeline must be closed under each action's standing requirements."""
    services_of: Dict[str, set] = {
        h.name: {s.kind for s in h.services} for h in spec.hosts
    }
    c2_hosts = {name for name, kinds in services_of.items() if "c2" in kinds}
    activation_kinds = {(a.host, a.kind) for a in spec.activations}
    trojan_hosts = {a.host for a in spec.activations if a.kind == "spytrojan"}
    for a in spec.activations:
        if a.c2_host and a.c2_host not in c2_hosts:
            raise ValidationError(
                f"activation on {a.host}: {a.c2_host} runs no c2 service"
            )
    entries: List[Tuple[str, str, dict]] = [
        (e.step_label, e.kind, e.params) for e in spec.timeline
    ] + [(f"profile {p.name}", p.kind, p.params) for p in spec.profiles]
    for label, kind, params in entries:
        need_service = {
            "BROWSE": ("target", "web"),
            "UPLOAD_FILE": ("target", "web"),
            "WEBSHELL_EXEC": ("target", "web"),
            "FTP_STOR": ("server", "ftp"),
            "FILE_SHARE_SYNC": ("server", "ftp"),
            "SEND_EMAIL": ("to", "email"),
            "REMOTE_COPY": ("target", "ssh"),
            "REMOTE_EXEC": ("target", "ssh"),
        }.get(kind)
        if need_service is not None:
            param, service = need_service
            target = params.get(param)
            if target not in services_of:
                raise DanglingReference(f"{label}: unknown {param} {target!r}")
            if service not in services_of[target]:
                raise ValidationError(f"{label}: {target} runs no {service} service")
        if kind in ("C2_TASK", "C2_BEACON") and not c2_hosts:
            raise ValidationError(f"{label}: scenario has no c2 service")
        if kind == "FCI_RUN" and (params.get("host"), "fcimodule") not in activation_kinds:
            raise ValidationError(f"{label}: no fcimodule activation on {params.get('host')!r}")
        if kind == "FDI_RUN" and (params.get("host"), "s7fdi") not in activation_kinds:
            raise ValidationError(f"{label}: no s7fdi activation on {params.get('host')!r}")
        via = params.get("via_implant")
        if via is not None and via not in trojan_hosts:
            raise ValidationError(f"{label}: no spytrojan activation on {via!r}")
