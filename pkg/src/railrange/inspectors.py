"""Offline IOC scanners over a packaged dataset, scored against its catalog.

Four detectors, mirroring what a first-pass forensic triage would run:

  encoded-url      base64 command strings in URLs — in clear web traffic,
                   in web access logs, and inside the sealed C2 channel
                   when the bundle escrows session keys
  process-names    known-bad process names, implant modules, and
                   persistence launch flags in memory snapshots
  write-flood      sustained bursts of Modbus single-coil writes against
                   one coil (false-command-injection signature)
  register-range   telemetry register values outside the substation's
                   operating bands, on both the Modbus and S7 surfaces

`scan_dataset` returns findings plus recall against the indicator catalog:
which planted indicators the scanners rediscovered, by class and overall.
A benign capture must produce zero findings.
"""

from __future__ import annotations

import base64
import binascii
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Set, Tuple

from .errors import EvidenceError
from .evidence import read_pcap
from .evidence.pcapio import PcapRecord
from .protocols import modbus as mb
from .protocols import s7
from .protocols.cipher import open_sealed, parse_key_log

C2_PORT = 443
WEB_PORT = 80

KNOWN_BAD_PROCESS_NAMES = frozenset({"updhelper.exe", "fciModule.exe", "powercheck.py"})
IMPLANT_MODULES = frozenset({"keylogger.dll", "screengrab.dll"})
PERSISTENCE_FLAGS = ("--resident",)

VOLTAGE_BAND = (600, 900)
CURRENT_BAND = (320, 480)

WRITE_FLOOD_WINDOW_S = 10
WRITE_FLOOD_PER_S = 1.0


@dataclass
class Finding:
    scanner: str
    cls: str  # NETWORK | MEMORY | LOG
    detail: str
    payload_sha256s: Set[str] = field(default_factory=set)
    memory_refs: Set[Tuple[str, int]] = field(default_factory=set)  # (host, pid)
    log_lines: List[str] = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "scanner": self.scanner,
            "class": self.cls,
            "detail": self.detail,
        }
        if self.memory_refs:
            out["memory_refs"] = [
                {"host": h, "pid": p} for h, p in sorted(self.memory_refs)
            ]
        if self.log_lines:
            out["log_lines"] = list(self.log_lines)
        if self.extra:
            out.update(self.extra)
        out["frame_count"] = len(self.payload_sha256s)
        return out


def _decode_b64_text(token: str) -> Optional[str]:
    try:
        raw = base64.b64decode(token.encode("ascii"), validate=True)
        text = raw.decode("utf-8")
    except (binascii.Error, ValueError, UnicodeError):
        return None
    if not text or any(not c.isprintable() and c not in "\n\r\t" for c in text):
        return None
    return text


def _query_values(target: str) -> List[str]:
    """Values of the query pairs in a URL target, if any."""
    _, sep, query = target.partition("?")
    if not sep:
        return []
    return [pair.partition("=")[2] for pair in query.split("&") if "=" in pair]


class _DatasetView:
    """Cached loads over one packaged dataset."""

    def __init__(self, root):
        self.root = Path(root)
        if not (self.root / "manifest.json").exists():
            raise EvidenceError(f"{root}: not a packaged dataset (no manifest.json)")
        self._records: Optional[List[Tuple[PcapRecord, str]]] = None
        self._keys: Optional[Dict[str, bytes]] = None

    def records(self) -> List[Tuple[PcapRecord, str]]:
        """All pcap records with their payload SHA-256, across every capture."""
        if self._records is None:
            out = []
            net_dir = self.root / "network"
            if net_dir.exists():
                for path in sorted(net_dir.glob("*.pcap")):
                    for record in read_pcap(path):
                        out.append((record, hashlib.sha256(record.payload).hexdigest()))
            self._records = out
        return self._records

    def escrow_keys(self) -> Dict[str, bytes]:
        if self._keys is None:
            path = self.root / "logs" / "keys.log"
            self._keys = parse_key_log(path.read_text()) if path.exists() else {}
        return self._keys

    def log_files(self) -> List[Tuple[str, List[str]]]:
        logs_dir = self.root / "logs"
        if not logs_dir.exists():
            return []
        return [
            (p.name, p.read_text().splitlines())
            for p in sorted(logs_dir.iterdir())
            if p.is_file() and p.name != "keys.log"
        ]

    def memory_docs(self) -> List[dict]:
        mem_dir = self.root / "memory"
        if not mem_dir.exists():
            return []
        return [json.loads(p.read_text()) for p in sorted(mem_dir.glob("*.json"))]

    def catalog(self) -> dict:
        return json.loads((self.root / "catalog.json").read_text())


# ---------------------------------------------------------------------------
# Scanners
# ---------------------------------------------------------------------------


def scan_encoded_urls(view: _DatasetView) -> List[Finding]:
    findings: Dict[str, Finding] = {}

    def note(cls: str, command: str, where: str) -> Finding:
        key = f"{cls}:{command}"
        if key not in findings:
            findings[key] = Finding(
                scanner="encoded-url",
                cls=cls,
                detail=f"base64-encoded command {command!r} in {where}",
                extra={"command": command},
            )
        return findings[key]

    # clear-text HTTP with ?<key>=<base64> queries
    for record, sha in view.records():
        if record.dst_port != WEB_PORT or not record.payload.startswith(b"GET "):
            continue
        target = record.payload.split(b" ", 2)[1].decode("utf-8", errors="replace")
        for value in _query_values(target):
            decoded = _decode_b64_text(value)
            if decoded is not None:
                note("NETWORK", decoded, f"web request {target.partition('?')[0]}").payload_sha256s.add(sha)

    # sealed C2 channel, when the key escrow is part of the bundle
    keys = view.escrow_keys()
    if keys:
        for record, sha in view.records():
            if C2_PORT not in (record.src_port, record.dst_port):
                continue
            if not record.payload.startswith(b"SEAL"):
                continue
            try:
                _, plaintext = open_sealed(record.payload, keys)
            except Exception:
                continue
            text = plaintext.decode("utf-8", errors="replace")
            for line in text.split("\r\n"):
                tokens = line.split(" ")
                candidates = []
                for token in tokens:
                    if "?cmd=" in token:
                        candidates.append(token.split("?cmd=", 1)[1])
                if line.startswith("200 TASK ") and len(tokens) == 3:
                    candidates.append(tokens[2])
                for blob in candidates:
                    decoded = _decode_b64_text(blob)
                    if decoded is not None:
                        note("NETWORK", decoded, "sealed c2 channel").payload_sha256s.add(sha)

    # web access logs: request lines with encoded queries, upload bodies
    for log_name, lines in view.log_files():
        for line in lines:
            tokens = line.split(" ")
            candidates: List[str] = []
            if len(tokens) == 5 and tokens[2] == "UPLOAD":
                candidates.append(tokens[4])  # `<iso> <ip> UPLOAD <name> <b64 body>`
            elif len(tokens) == 6:
                candidates.extend(_query_values(tokens[3]))  # request target
            for blob in candidates:
                decoded = _decode_b64_text(blob)
                if decoded is not None:
                    f = note("LOG", decoded, f"log {log_name}")
                    if line not in f.log_lines:
                        f.log_lines.append(line)
    return list(findings.values())


def scan_process_names(view: _DatasetView) -> List[Finding]:
    findings: List[Finding] = []
    for doc in view.memory_docs():
        host = doc["host"]
        for proc in doc["processes"]:
            reasons = []
            if proc["name"] in KNOWN_BAD_PROCESS_NAMES:
                reasons.append(f"known-bad name {proc['name']!r}")
            bad_modules = IMPLANT_MODULES.intersection(proc.get("loaded_modules", ()))
            if bad_modules:
                reasons.append(f"implant modules {sorted(bad_modules)}")
            if any(flag in proc["cmdline"] for flag in PERSISTENCE_FLAGS):
                reasons.append("persistence launch flag")
            if not reasons:
                continue
            finding = Finding(
                scanner="process-names",
                cls="MEMORY",
                detail=f"{host} pid {proc['pid']} {proc['name']}: " + "; ".join(reasons),
                extra={"host": host, "pid": proc["pid"], "name": proc["name"]},
            )
            finding.memory_refs.add((host, proc["pid"]))
            findings.append(finding)
    return findings


def scan_write_flood(
    view: _DatasetView,
    window_s: int = WRITE_FLOOD_WINDOW_S,
    per_s: float = WRITE_FLOOD_PER_S,
) -> List[Finding]:
    groups: Dict[Tuple[str, int], List[Tuple[int, str]]] = {}
    for record, sha in view.records():
        if record.dst_port != mb.MODBUS_PORT or not record.payload:
            continue
        try:
            _, pdu = mb.decode_modbus(record.payload, mb.REQUEST)
        except Exception:
            continue
        if isinstance(pdu, mb.WriteSingleCoil):
            groups.setdefault((record.dst_ip, pdu.addr), []).append((record.ts_us, sha))

    findings = []
    limit = per_s * window_s
    for (dst_ip, addr), hits in sorted(groups.items()):
        hits.sort()
        times = [ts for ts, _ in hits]
        flagged = False
        lo = 0
        for hi in range(len(times)):
            while times[hi] - times[lo] > window_s * 1_000_000:
                lo += 1
            if hi - lo + 1 > limit:
                flagged = True
                break
        if not flagged:
            continue
        span_s = (times[-1] - times[0]) / 1_000_000
        rate = len(times) / span_s if span_s > 0 else float(len(times))
        finding = Finding(
            scanner="write-flood",
            cls="NETWORK",
            detail=(
                f"{len(times)} single-coil writes to {dst_ip} coil {addr} "
                f"over {span_s:.1f}s ({rate:.1f}/s)"
            ),
            extra={"dst_ip": dst_ip, "coil": addr, "writes": len(times)},
        )
        finding.payload_sha256s.update(sha for _, sha in hits)
        findings.append(finding)
    return findings


def scan_register_ranges(
    view: _DatasetView,
    voltage_band: Tuple[int, int] = VOLTAGE_BAND,
    current_band: Tuple[int, int] = CURRENT_BAND,
) -> List[Finding]:
    findings: Dict[str, Finding] = {}

    def out_of_band(values) -> List[str]:
        problems = []
        if len(values) >= 1 and not voltage_band[0] <= values[0] <= voltage_band[1]:
            problems.append(f"voltage {values[0]} outside {list(voltage_band)}")
        if len(values) >= 2 and not current_band[0] <= values[1] <= current_band[1]:
            problems.append(f"current {values[1]} outside {list(current_band)}")
        return problems

    def note(key: str, detail: str, sha: str, extra: dict) -> None:
        if key not in findings:
            findings[key] = Finding(
                scanner="register-range", cls="NETWORK", detail=detail, extra=extra
            )
        findings[key].payload_sha256s.add(sha)

    for record, sha in view.records():
        # substation telemetry: 2-register *input* reads are the [V, A] feed
        # (train PLCs expose wider input blocks and unrelated holding pairs)
        if record.src_port == mb.MODBUS_PORT and record.payload:
            try:
                _, pdu = mb.decode_modbus(record.payload, mb.RESPONSE)
            except Exception:
                continue
            if (
                isinstance(pdu, mb.ReadRegistersResponse)
                and pdu.fc == mb.FC_READ_INPUT
                and len(pdu.values) == 2
            ):
                problems = out_of_band(pdu.values)
                if problems:
                    note(
                        f"mb:{record.src_ip}:{pdu.values}",
                        f"telemetry read from {record.src_ip}: " + ", ".join(problems),
                        sha,
                        {"src_ip": record.src_ip, "values": list(pdu.values)},
                    )
        # S7-style writes into the input-register image
        elif record.dst_port == s7.S7_PORT and record.payload:
            try:
                decoded = s7.decode_s7(record.payload)
            except Exception:
                continue
            if isinstance(decoded, s7.S7WriteRequest) and decoded.start == 0:
                problems = out_of_band(decoded.values)
                if problems:
                    note(
                        f"s7:{record.dst_ip}:{decoded.values}",
                        f"register override sent to {record.dst_ip}: " + ", ".join(problems),
                        sha,
                        {"dst_ip": record.dst_ip, "values": list(decoded.values)},
                    )
    return list(findings.values())


# ---------------------------------------------------------------------------
# Recall against the catalog
# ---------------------------------------------------------------------------


def _match_catalog(catalog: dict, findings: Iterable[Finding]) -> dict:
    shas: Set[str] = set()
    refs: Set[Tuple[str, int]] = set()
    lines: List[str] = []
    for f in findings:
        shas |= f.payload_sha256s
        refs |= f.memory_refs
        lines.extend(f.log_lines)

    matched, missed = [], []
    by_class: Dict[str, Dict[str, int]] = {}
    for entry in catalog["entries"]:
        locator = entry["locator"]
        kind = locator["kind"]
        hit = False
        if kind == "frame":
            hit = locator["payload_sha256"] in shas
        elif kind == "memory":
            hit = (locator["host"], locator["pid"]) in refs
        elif kind == "log":
            hit = any(locator["match"] in line for line in lines)
        # file locators have no scanner here; they stay unmatched
        stats = by_class.setdefault(entry["class"], {"total": 0, "matched": 0})
        stats["total"] += 1
        if hit:
            stats["matched"] += 1
            matched.append(entry["id"])
        else:
            missed.append(entry["id"])
    total = len(catalog["entries"])
    return {
        "total": total,
        "matched": len(matched),
        "overall": (len(matched) / total) if total else None,
        "by_class": by_class,
        "matched_ids": matched,
        "missed_ids": missed,
    }


def scan_dataset(dataset_dir) -> dict:
    """Run every scanner over one packaged dataset; score against its catalog."""
    view = _DatasetView(dataset_dir)
    findings: List[Finding] = []
    findings += scan_encoded_urls(view)
    findings += scan_process_names(view)
    findings += scan_write_flood(view)
    findings += scan_register_ranges(view)
    by_scanner: Dict[str, int] = {}
    for f in findings:
        by_scanner[f.scanner] = by_scanner.get(f.scanner, 0) + 1
    return {
        "dataset": str(view.root),
        "scenario": view.catalog().get("scenario"),
        "findings": [f.to_dict() for f in findings],
        "counts_by_scanner": by_scanner,
        "recall": _match_catalog(view.catalog(), findings),
    }


def render_scan_report(report: dict) -> List[str]:
    lines = [f"ioc-scan: {report['scenario']} ({report['dataset']})"]
    if not report["findings"]:
        lines.append("findings: none")
    else:
        lines.append(f"findings: {len(report['findings'])}")
        for f in report["findings"]:
            lines.append(f"  [{f['scanner']}] {f['class']}: {f['detail']}")
    recall = report["recall"]
    if recall["total"] == 0:
        lines.append("catalog: empty (nothing planted); recall not applicable")
    else:
        lines.append(
            f"recall: {recall['matched']}/{recall['total']} planted indicators rediscovered"
            f" ({recall['overall']:.0%})"
        )
        for cls in sorted(recall["by_class"]):
            stats = recall["by_class"][cls]
            lines.append(f"  {cls}: {stats['matched']}/{stats['total']}")
    return lines
