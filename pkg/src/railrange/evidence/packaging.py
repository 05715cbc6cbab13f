"""Dataset packaging: evidence files, dataset manifest, indicator catalog.

``package_dataset`` lays a finished run out as::

    <out_root>/<scenario>/
        network/<name>.pcap          one per planned capture vantage
        memory/<host>.json           per-host memory snapshot documents
        logs/web.log                 web access log (when planned)
        logs/keys.log                session key escrow (when planned)
        disk/<host>.json             per-host file-tree manifests
        disk/artifacts/<host>/<file> bytes of dropped tools
        timeline.log                 narrative event log
        catalog.json                 planted-indicator catalog
        manifest.json                file list with sizes and SHA-256 hashes

Everything written is a pure function of the finished run state, so two
runs of the same (scenario, seed) produce byte-identical datasets.

``verify_dataset`` re-hashes a bundle against its manifest and rejects
stray files; ``resolve_catalog`` proves every catalog locator against the
packaged evidence (file hashes, memory process fields, pcap payloads, log
lines).  Both are the foundations of the inspection commands.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from ..errors import EvidenceError, IncompleteRun, LocatorUnresolvable, ManifestMismatch
from . import pcapio

SCHEMA_VERSION = "1"

_CLASS_BY_AREA = {
    "network": "NETWORK",
    "memory": "MEMORY",
    "logs": "LOG",
    "disk": "FILESYSTEM",
}


def _file_class(rel_path: str) -> str:
    if rel_path == "logs/keys.log":
        return "KEYLOG"
    area = rel_path.split("/", 1)[0]
    return _CLASS_BY_AREA.get(area, "META")


def _write_text(path: Path, lines: List[str]) -> None:
    body = "\n".join(lines)
    if body:
        body += "\n"
    path.write_text(body, newline="\n")


def _write_json(path: Path, document: dict) -> None:
    path.write_text(json.dumps(document, indent=2, sort_keys=True) + "\n", newline="\n")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


# ---------------------------------------------------------------------------
# Packaging
# ---------------------------------------------------------------------------


def package_dataset(runtime, out_root) -> Path:
    """Write one finished run as an evidence bundle; returns the bundle dir."""
    spec = runtime.spec
    ev = spec.evidence
    if runtime.report is None or runtime.loop.now < spec.duration_us:
        raise IncompleteRun(f"scenario {spec.name} has not run to completion")
    for host in ev.memory_hosts:
        if host not in runtime.memory_snapshots:
            raise IncompleteRun(f"planned memory snapshot for {host} was never taken")
    for host in ev.disk_hosts:
        if host not in runtime.disk_manifests:
            raise IncompleteRun(f"planned disk manifest for {host} was never taken")

    root = Path(out_root) / spec.name
    if root.exists():
        if not (root / "manifest.json").exists() and any(root.iterdir()):
            raise EvidenceError(f"{root} exists and is not a previous dataset; refusing to overwrite")
        import shutil

        shutil.rmtree(root)
    root.mkdir(parents=True)

    epoch_unix_us = int(runtime.loop.epoch.timestamp()) * 1_000_000

    if ev.pcaps:
        (root / "network").mkdir()
        for pcap in ev.pcaps:
            frames = [frame for frame, _outcome in runtime.captures[pcap.name]]
            pcapio.write_pcap(root / "network" / f"{pcap.name}.pcap", frames, epoch_unix_us)

    if ev.memory_hosts:
        (root / "memory").mkdir()
        for host in ev.memory_hosts:
            _write_json(root / "memory" / f"{host}.json", runtime.memory_snapshots[host])

    if ev.log_names or ev.key_log:
        (root / "logs").mkdir()
        for log_name in ev.log_names:
            _write_text(root / "logs" / log_name, runtime.log_lines(log_name))
        if ev.key_log:
            _write_text(root / "logs" / "keys.log", runtime.keychain.escrow_lines())

    if ev.disk_hosts:
        (root / "disk").mkdir()
        for host in ev.disk_hosts:
            _write_json(root / "disk" / f"{host}.json", runtime.disk_manifests[host])
            artifacts = runtime.disk_artifacts.get(host, {})
            if artifacts:
                art_dir = root / "disk" / "artifacts" / host
                art_dir.mkdir(parents=True)
                for path, content in artifacts.items():
                    name = path.replace("\\", "/").rsplit("/", 1)[-1]
                    (art_dir / name).write_bytes(content)

    _write_text(root / "timeline.log", runtime.timeline_log_lines())
    _write_json(root / "catalog.json", build_catalog(runtime))
    _write_json(root / "manifest.json", _build_manifest(runtime, root))
    return root


def build_catalog(runtime) -> dict:
    spec = runtime.spec
    entries = []
    counts: Dict[str, int] = {"FILESYSTEM": 0, "MEMORY": 0, "NETWORK": 0, "LOG": 0}
    for i, entry in enumerate(runtime.truth.entries, start=1):
        counts[entry.cls] = counts.get(entry.cls, 0) + 1
        entries.append(
            {
                "id": f"{spec.name.upper()}-{i:04d}",
                "class": entry.cls,
                "step_label": entry.step_label,
                "description": entry.description,
                "locator": dict(entry.locator),
                "first_ts_us": entry.first_ts_us,
                "count": entry.count,
            }
        )
    return {
        "schema_version": SCHEMA_VERSION,
        "scenario": spec.name,
        "seed": runtime.seed,
        "entries": entries,
        "counts": counts,
    }


def _build_manifest(runtime, root: Path) -> dict:
    files = []
    for path in sorted(root.rglob("*")):
        if not path.is_file() or path.name == "manifest.json":
            continue
        rel = path.relative_to(root).as_posix()
        files.append(
            {
                "path": rel,
                "bytes": path.stat().st_size,
                "sha256": _sha256(path),
                "class": _file_class(rel),
            }
        )
    return {
        "schema_version": SCHEMA_VERSION,
        "scenario": runtime.spec.name,
        "seed": runtime.seed,
        "created_at": runtime.loop.iso(),
        "files": files,
    }


# ---------------------------------------------------------------------------
# Verification
# ---------------------------------------------------------------------------


def load_manifest(dataset_dir) -> dict:
    path = Path(dataset_dir) / "manifest.json"
    if not path.exists():
        raise ManifestMismatch(f"{dataset_dir}: no manifest.json")
    return json.loads(path.read_text())


def verify_dataset(dataset_dir) -> dict:
    """Re-hash the bundle against its manifest; returns the manifest."""
    root = Path(dataset_dir)
    manifest = load_manifest(root)
    listed = set()
    for record in manifest["files"]:
        rel = record["path"]
        listed.add(rel)
        path = root / rel
        if not path.exists():
            raise ManifestMismatch(f"{rel}: listed in the manifest but missing")
        size = path.stat().st_size
        if size != record["bytes"]:
            raise ManifestMismatch(f"{rel}: size {size} != manifest {record['bytes']}")
        digest = _sha256(path)
        if digest != record["sha256"]:
            raise ManifestMismatch(f"{rel}: sha256 mismatch")
    for path in sorted(root.rglob("*")):
        if not path.is_file() or path.name == "manifest.json":
            continue
        rel = path.relative_to(root).as_posix()
        if rel not in listed:
            raise ManifestMismatch(f"{rel}: present in the bundle but not in the manifest")
    return manifest


# ---------------------------------------------------------------------------
# Catalog resolution
# ---------------------------------------------------------------------------


class _Bundle:
    """Lazy-loading view over a packaged dataset used by the resolver."""

    def __init__(self, root: Path):
        self.root = root
        self._memory: Dict[str, dict] = {}
        self._disk: Dict[str, dict] = {}
        self._logs: Dict[str, List[str]] = {}
        self._pcap_index: Optional[Dict[str, List[pcapio.PcapRecord]]] = None

    def memory(self, host: str) -> Optional[dict]:
        if host not in self._memory:
            path = self.root / "memory" / f"{host}.json"
            self._memory[host] = json.loads(path.read_text()) if path.exists() else None
        return self._memory[host]

    def disk(self, host: str) -> Optional[dict]:
        if host not in self._disk:
            path = self.root / "disk" / f"{host}.json"
            self._disk[host] = json.loads(path.read_text()) if path.exists() else None
        return self._disk[host]

    def log(self, name: str) -> List[str]:
        if name not in self._logs:
            path = self.root / "logs" / name
            self._logs[name] = path.read_text().splitlines() if path.exists() else []
        return self._logs[name]

    def payload_index(self) -> Dict[str, List[pcapio.PcapRecord]]:
        if self._pcap_index is None:
            index: Dict[str, List[pcapio.PcapRecord]] = {}
            net_dir = self.root / "network"
            if net_dir.exists():
                for pcap_path in sorted(net_dir.glob("*.pcap")):
                    for record in pcapio.read_pcap(pcap_path):
                        digest = hashlib.sha256(record.payload).hexdigest()
                        index.setdefault(digest, []).append(record)
            self._pcap_index = index
        return self._pcap_index


def _resolve_file(bundle: _Bundle, locator: dict) -> Optional[str]:
    doc = bundle.disk(locator["host"])
    if doc is None:
        return f"no disk manifest for host {locator['host']}"
    for record in doc["files"]:
        if record["path"] == locator["path"]:
            if record["sha256"] != locator["sha256"]:
                return f"{locator['path']}: content hash changed"
            return None
    return f"{locator['path']}: not in the disk manifest"


def _resolve_memory(bundle: _Bundle, locator: dict) -> Optional[str]:
    doc = bundle.memory(locator["host"])
    if doc is None:
        return f"no memory snapshot for host {locator['host']}"
    proc = next((p for p in doc["processes"] if p["pid"] == locator["pid"]), None)
    if proc is None:
        return f"pid {locator['pid']} not in the snapshot"
    field, match = locator["field"], locator["match"]
    if field == "process":
        ok = proc["name"] == match
    elif field == "cmdline":
        ok = match in proc["cmdline"]
    elif field == "module":
        ok = match in proc["loaded_modules"]
    elif field == "socket":
        ok = any(f"{s['raddr']}:{s['rport']}" == match for s in proc["open_sockets"])
    else:
        return f"unknown memory field {field!r}"
    return None if ok else f"pid {locator['pid']}: {field} does not match {match!r}"


def _resolve_frame(bundle: _Bundle, locator: dict) -> Optional[str]:
    records = bundle.payload_index().get(locator["payload_sha256"], [])
    if not records:
        return f"flow {locator['flow_id']}: payload not in any pcap"
    flow = locator["flow_id"]
    for record in records:
        tagged = record.seq if record.proto == "tcp" else record.ip_ident
        expected = flow & (0xFFFFFFFF if record.proto == "tcp" else 0xFFFF)
        if tagged == expected:
            return None
    return f"flow {flow}: payload found but no record carries the flow id"


def _resolve_log(bundle: _Bundle, locator: dict) -> Optional[str]:
    lines = bundle.log(locator["name"])
    if not lines:
        return f"log {locator['name']} missing or empty"
    if any(locator["match"] in line for line in lines):
        return None
    return f"log {locator['name']}: no line contains {locator['match']!r}"


_RESOLVERS = {
    "file": _resolve_file,
    "memory": _resolve_memory,
    "frame": _resolve_frame,
    "log": _resolve_log,
}


def resolve_catalog(dataset_dir) -> dict:
    """Check every catalog locator against the bundle.

    Returns ``{"total", "resolved", "failures": [{id, reason}, ...]}``.
    """
    root = Path(dataset_dir)
    catalog_path = root / "catalog.json"
    if not catalog_path.exists():
        raise LocatorUnresolvable(f"{dataset_dir}: no catalog.json")
    catalog = json.loads(catalog_path.read_text())
    bundle = _Bundle(root)
    failures: List[dict] = []
    for entry in catalog["entries"]:
        locator = entry["locator"]
        resolver = _RESOLVERS.get(locator.get("kind"))
        if resolver is None:
            failures.append({"id": entry["id"], "reason": f"unknown locator kind {locator.get('kind')!r}"})
            continue
        reason = resolver(bundle, locator)
        if reason is not None:
            failures.append({"id": entry["id"], "reason": reason})
    return {
        "total": len(catalog["entries"]),
        "resolved": len(catalog["entries"]) - len(failures),
        "failures": failures,
    }
