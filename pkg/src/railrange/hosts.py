"""Host runtime state: processes, files, credentials and per-host events.

Hosts are bookkeeping, not emulation: a "process" is the record a memory
snapshot will later serialize (pid, ppid, name, cmdline, start time, loaded
modules, open sockets), and a "file" is the record a disk manifest will hash.
Actors and services mutate this state; the evidence layer only reads it.

PID policy: boot-time system processes get a deterministic per-host ladder;
implant processes get a stable pseudo-random pid derived from (seed, host)
so a given scenario always produces the same forensic picture.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

# Chosen so that implant_pid(42, "staff01") == 8340; see the derivation test.
PID_TUNE = 8076
_PID_SPAN = 30000


def _stable_hash(text: str) -> int:
    return int(hashlib.sha256(text.encode("utf-8")).hexdigest(), 16)


def implant_pid(seed: int, host: str) -> int:
    """Deterministic pid for the first implant planted on `host`."""
    base = _stable_hash(f"pid:{seed}:{host}") % _PID_SPAN
    return 1000 + (base + PID_TUNE) % _PID_SPAN


BOOT_PROCESSES = {
    "windows": (
        ("System", "", 4),
        ("smss.exe", r"\SystemRoot\System32\smss.exe", None),
        ("winlogon.exe", "winlogon.exe", None),
        ("svchost.exe", "svchost.exe -k netsvcs", None),
        ("explorer.exe", "C:\\Windows\\explorer.exe", None),
        ("outlook.exe", "C:\\Program Files\\Office\\outlook.exe", None),
    ),
    "linux": (
        ("systemd", "/sbin/init", 1),
        ("sshd", "/usr/sbin/sshd -D", None),
        ("cron", "/usr/sbin/cron -f", None),
        ("rsyslogd", "/usr/sbin/rsyslogd -n", None),
    ),
    "controller": (
        ("plc_runtime", "/opt/runtime/plc_main", 1),
    ),
}


@dataclass
class Socket:
    laddr: str
    lport: int
    raddr: str
    rport: int
    proto: str = "tcp"

    def as_dict(self) -> dict:
        return {
            "laddr": self.laddr,
            "lport": self.lport,
            "raddr": self.raddr,
            "rport": self.rport,
            "proto": self.proto,
        }


@dataclass
class Process:
    pid: int
    ppid: int
    name: str
    cmdline: str
    start_ts: int
    running: bool = True
    end_ts: Optional[int] = None
    loaded_modules: List[str] = field(default_factory=list)
    open_sockets: List[Socket] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "pid": self.pid,
            "ppid": self.ppid,
            "name": self.name,
            "cmdline": self.cmdline,
            "start_ts": self.start_ts,
            "loaded_modules": list(self.loaded_modules),
            "open_sockets": [s.as_dict() for s in self.open_sockets],
        }


@dataclass
class FileEntry:
    path: str
    content: bytes
    mtime_us: int
    origin: str = "benign"  # benign | malicious
    note: str = ""

    def sha256(self) -> str:
        return hashlib.sha256(self.content).hexdigest()


@dataclass
class HostEvent:
    ts_us: int
    kind: str
    detail: str


class Host:
    """One machine: name, address, OS flavor, processes, files, traits."""

    def __init__(
        self,
        name: str,
        ip: str,
        segment: str,
        os_label: str = "windows",
        seed: int = 42,
        tags: Tuple[str, ...] = (),
        execute_email_attachments: bool = False,
        auto_run_downloads: bool = False,
    ):
        self.name = name
        self.ip = ip
        self.segment = segment
        self.os_label = os_label
        self.seed = seed
        self.tags = tuple(tags)
        self.execute_email_attachments = execute_email_attachments
        self.auto_run_downloads = auto_run_downloads
        self.procs: Dict[int, Process] = {}
        self.fs: Dict[str, FileEntry] = {}
        self.credentials: Dict[str, str] = {}  # service -> "user:password"
        self.events: List[HostEvent] = []
        self._last_pid = 0
        self._implant_pid_used = False
        self.mailbox: List[dict] = []

    # -- processes ----------------------------------------------------------

    def boot(self, ts_us: int = 0) -> None:
        for name, cmdline, fixed_pid in BOOT_PROCESSES.get(self.os_label, ()):
            pid = fixed_pid if fixed_pid is not None else self._next_pid(name)
            parent = 0 if not self.procs else min(self.procs)
            proc = Process(
                pid=pid,
                ppid=parent,
                name=name,
                cmdline=cmdline,
                start_ts=ts_us,
            )
            self.procs[pid] = proc
            self._last_pid = max(self._last_pid, pid)

    def _next_pid(self, name: str) -> int:
        pid = self._last_pid + 8 + _stable_hash(f"{self.name}:{name}:{self._last_pid}") % 400
        while pid in self.procs:
            pid += 1
        self._last_pid = pid
        return pid

    def allocate_implant_pid(self) -> int:
        """First implant gets the stable (seed, host) pid; later ones cascade."""
        pid = implant_pid(self.seed, self.name)
        while pid in self.procs:
            pid += 1
        return pid

    def spawn(
        self,
        ts_us: int,
        name: str,
        cmdline: str,
        ppid: Optional[int] = None,
        implant: bool = False,
        modules: Tuple[str, ...] = (),
    ) -> Process:
        if implant and not self._implant_pid_used:
            pid = self.allocate_implant_pid()
            self._implant_pid_used = True
        else:
            pid = self._next_pid(name)
        if ppid is None:
            ppid = self.pid_of("explorer.exe") or self.pid_of("systemd") or 1
        proc = Process(
            pid=pid,
            ppid=ppid,
            name=name,
            cmdline=cmdline,
            start_ts=ts_us,
            loaded_modules=list(modules),
        )
        self.procs[pid] = proc
        self._last_pid = max(self._last_pid, pid)
        self.log(ts_us, "process_start", f"{name} pid={pid} ppid={ppid}")
        return proc

    def exit_process(self, ts_us: int, pid: int) -> None:
        proc = self.procs[pid]
        proc.running = False
        proc.end_ts = ts_us
        self.log(ts_us, "process_exit", f"{proc.name} pid={pid}")

    def pid_of(self, name: str) -> Optional[int]:
        for pid, proc in self.procs.items():
            if proc.name == name and proc.running:
                return pid
        return None

    def running_processes(self) -> List[Process]:
        return [p for p in self.procs.values() if p.running]

    # -- files --------------------------------------------------------------

    def write_file(
        self,
        ts_us: int,
        path: str,
        content: bytes,
        origin: str = "benign",
        note: str = "",
    ) -> FileEntry:
        entry = FileEntry(path=path, content=content, mtime_us=ts_us, origin=origin, note=note)
        self.fs[path] = entry
        self.log(ts_us, "file_write", f"{path} ({len(content)} bytes)")
        return entry

    def read_file(self, path: str) -> Optional[bytes]:
        entry = self.fs.get(path)
        return None if entry is None else entry.content

    def has_file(self, path: str) -> bool:
        return path in self.fs

    # -- misc ---------------------------------------------------------------

    def log(self, ts_us: int, kind: str, detail: str) -> None:
        self.events.append(HostEvent(ts_us=ts_us, kind=kind, detail=detail))

    def credential_line(self) -> str:
        """Render this host's stored credentials the way its owner keeps them."""
        lines = [f"{service}: {cred}" for service, cred in self.credentials.items()]
        return "\n".join(lines) + ("\n" if lines else "")
