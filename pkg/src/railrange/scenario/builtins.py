"""Built-in scenario documents: two attack sequences and a benign control.

``as1``    Two-day intrusion: a corporate insider stages tooling, a phishing
           mail plants an implant, credentials stolen over the C2 channel
           open an SSH path into the maintenance segment, and a dropped
           false-command-injection module floods the railway PLC until the
           collision-avoidance system is off and train ``weline01`` loses
           traction in front of its follower.

``as2``    One-morning web compromise: a web-shell upload on the corporate
           app leaks the file-share credential, a trojan planted on the
           share rides user syncs onto two workstations, stolen SCADA
           credentials carry a telemetry-override script to the operator
           jump host, and false RTU readings drive the HMI to trip the
           substation breaker — grid power drops to exactly zero.

``benign`` The same plant, devices and office behaviors with no attacker;
           the negative control for detection tooling.

Each builtin is produced as a plain JSON document and pushed through
``load_spec``, so the builtins exercise exactly the same schema and
semantic validation as user-supplied scenario files.
"""

from __future__ import annotations

import copy

from ..errors import SchemaError
from .model import ScenarioSpec, load_spec

US = 1_000_000
_DAY_US = 86_400 * US

# Credentials an attacker must find inside the run (never hard-coded there).
MAINT_SSH_CRED = "maint:Depot24!"
SCADA_SSH_CRED = "operator:Scada24!"
SHARE_FTP_CRED = "syncsvc:Files24!"

TROJAN_AS1_NAME = "updateInstaller.exe"
TROJAN_AS2_NAME = "ZoomMeetingInstaller.exe"
FCI_DROP_PATH = "C:\\Users\\staff03\\AppData\\Local\\Temp\\fciModule.exe"
FDI_DROP_PATH = "C:\\Users\\staff03\\AppData\\Local\\Temp\\powercheck.py"
FCI_TOOL_PATH = "/opt/maint/fciModule.exe"
FDI_TOOL_PATH = "/home/operator/powercheck.py"


def _hms(hours: int, minutes: int = 0, seconds: int = 0) -> int:
    return ((hours * 60 + minutes) * 60 + seconds) * US


def _rail_layout() -> dict:
    """Shared physical plant: four circular tracks, ten trains.

    On T1 the start order puts ``weline02`` behind ``weline01`` in the fixed
    follower pairing, so cutting weline01's traction strands it in front of
    weline02.
    """
    return {
        "tracks": [
            {"id": "T1", "blocks": 10},
            {"id": "T2", "blocks": 10},
            {"id": "T3", "blocks": 8},
            {"id": "T4", "blocks": 8},
        ],
        "stations": [
            {"track": "T1", "block": 5},
            {"track": "T2", "block": 5},
            {"track": "T3", "block": 4},
            {"track": "T4", "block": 4},
        ],
        "junctions": [{"a": "T1-B09", "b": "T2-B09"}],
        "trains": [
            {"id": "weline01", "track": "T1", "block": 0},
            {"id": "weline02", "track": "T1", "block": 7},
            {"id": "weline03", "track": "T1", "block": 3},
            {"id": "weline04", "track": "T2", "block": 0},
            {"id": "weline05", "track": "T2", "block": 3},
            {"id": "weline06", "track": "T2", "block": 6},
            {"id": "weline07", "track": "T3", "block": 0},
            {"id": "weline08", "track": "T3", "block": 4},
            {"id": "weline09", "track": "T4", "block": 0},
            {"id": "weline10", "track": "T4", "block": 4},
        ],
        "cruise_mps": 14.0,
        "avoidance": "external",
    }


def _console(name, host, port, target, period_s, offset_ms, reads) -> dict:
    return {
        "name": name,
        "kind": "console",
        "host": host,
        "params": {
            "client_port": port,
            "target": target,
            "period_us": period_s * US,
            "start_offset_us": offset_ms * 1000,
            "reads": reads,
        },
    }


_REGISTER_READS = [
    {"fc": "input", "addr": 0, "qty": 16},
    {"fc": "holding", "addr": 0, "qty": 2},
]
_BIT_READS = [
    {"fc": "coils", "addr": 0, "qty": 16},
    {"fc": "coils", "addr": 100, "qty": 12},
]


# ---------------------------------------------------------------------------
# AS1: rail false-command injection -> collision
# ---------------------------------------------------------------------------


def _as1_document() -> dict:
    def d1(h, m=0, s=0):
        return _hms(h, m, s)

    def d2(h, m=0, s=0):
        return _DAY_US + _hms(h, m, s)

    credentials_note = (
        "# personal notes - do not share\n"
        f"maint-ws ssh: {MAINT_SSH_CRED}\n"
        "vpn portal: staff03:Tulip24!\n"
    )
    return {
        "schema_version": "1",
        "name": "as1",
        "title": "Rail service false-command injection",
        "epoch": "2024-04-03T00:00:00Z",
        "duration_us": 36 * _hms(1),
        "seed": 42,
        "segments": [
            {"name": "external", "cidr": "203.0.113.0/24"},
            {"name": "corp", "cidr": "10.27.34.0/26"},
            {"name": "hq-ops", "cidr": "10.27.34.128/26"},
            {"name": "maintenance", "cidr": "10.27.34.64/26"},
            {"name": "engineering", "cidr": "10.27.34.192/26"},
        ],
        "hosts": [
            {
                "name": "c2-server",
                "segment": "external",
                "ip": "203.0.113.80",
                "os": "linux",
                "services": [{"kind": "c2"}],
            },
            {
                "name": "hacker-web",
                "segment": "external",
                "ip": "203.0.113.50",
                "os": "linux",
                "services": [
                    {
                        "kind": "web",
                        "params": {
                            "routes": {
                                "/": {"text": "<html>Railworks Update Portal</html>"},
                                "/tools/updateInstaller.exe": {
                                    "builder": "spytrojan",
                                    "display_name": TROJAN_AS1_NAME,
                                },
                                "/tools/fciModule.bin": {"builder": "fcimodule"},
                            }
                        },
                    }
                ],
            },
            {
                "name": "staff03",
                "segment": "corp",
                "ip": "10.27.34.10",
                "execute_email_attachments": True,
                "services": [{"kind": "email"}],
                "files": [
                    {
                        "path": "C:\\Users\\staff03\\Documents\\credentials.txt",
                        "content": {"text": credentials_note},
                    },
                    {
                        "path": "C:\\Users\\staff03\\Documents\\q1_report.docx",
                        "content": {"blob": "q1-report", "size": 24_000},
                    },
                ],
            },
            {
                "name": "staff04",
                "segment": "corp",
                "ip": "10.27.34.5",
                "tags": ["insider"],
                "services": [{"kind": "email"}],
            },
            {"name": "ops01", "segment": "hq-ops", "ip": "10.27.34.131"},
            {"name": "ops02", "segment": "hq-ops", "ip": "10.27.34.132"},
            {"name": "ops03", "segment": "hq-ops", "ip": "10.27.34.133"},
            {"name": "ops04", "segment": "hq-ops", "ip": "10.27.34.134"},
            {
                "name": "maint-ws",
                "segment": "maintenance",
                "ip": "10.27.34.85",
                "os": "linux",
                "credentials": [{"service": "ssh", "value": MAINT_SSH_CRED}],
                "services": [{"kind": "ssh"}],
                "files": [
                    {
                        "path": "/opt/maint/railworks.cfg",
                        "content": {"text": "plc=10.27.34.193\nscan=1s\n"},
                    }
                ],
            },
            {"name": "maint02", "segment": "maintenance", "ip": "10.27.34.70"},
            {"name": "maint03", "segment": "maintenance", "ip": "10.27.34.71"},
            {"name": "plc-train", "segment": "engineering", "ip": "10.27.34.193", "os": "controller"},
            {"name": "plc-station", "segment": "engineering", "ip": "10.27.34.194", "os": "controller"},
            {"name": "plc-junction", "segment": "engineering", "ip": "10.27.34.195", "os": "controller"},
        ],
        "rules": [
            {"action": "ALLOW", "src": "corp", "dst": "external"},
            {"action": "ALLOW", "src": "external", "dst": "corp"},
            {"action": "ALLOW", "src": "corp", "dst": "maintenance", "port": 22},
            {"action": "ALLOW", "src": "maintenance", "dst": "corp"},
            {"action": "ALLOW", "src": "maintenance", "dst": "external", "port": 443},
            {"action": "ALLOW", "src": "external", "dst": "maintenance"},
            {"action": "ALLOW", "src": "maintenance", "dst": "engineering", "port": 502},
            {"action": "ALLOW", "src": "engineering", "dst": "maintenance"},
            {"action": "ALLOW", "src": "hq-ops", "dst": "engineering", "port": 502},
            {"action": "ALLOW", "src": "engineering", "dst": "hq-ops"},
        ],
        "layout": _rail_layout(),
        "devices": [
            {
                "name": "train-plc",
                "kind": "train_plc",
                "host": "plc-train",
                "params": {"scan_period_us": 1 * US},
            },
            {
                "name": "station-plc",
                "kind": "station_plc",
                "host": "plc-station",
                "params": {"scan_period_us": 1 * US},
            },
            {
                "name": "junction-plc",
                "kind": "junction_plc",
                "host": "plc-junction",
                "params": {"scan_period_us": 1 * US},
            },
            _console("ops01-console", "ops01", 47001, "plc-train", 5, 500, _REGISTER_READS),
            _console("ops02-console", "ops02", 47002, "plc-station", 6, 700, _REGISTER_READS),
            _console("ops03-console", "ops03", 47003, "plc-junction", 7, 900, _REGISTER_READS),
            _console("ops04-console", "ops04", 47004, "plc-train", 11, 1100, _BIT_READS),
        ],
        "activations": [
            {
                "host": "staff03",
                "kind": "spytrojan",
                "activate_label": "AS1-step-2",
                "beacon_label": "AS1-step-3:beacon",
                "c2_host": "c2-server",
            },
            {
                "host": "maint-ws",
                "kind": "fcimodule",
                "activate_label": "AS1-step-6",
                "beacon_label": "AS1-step-6:beacon",
                "c2_host": "c2-server",
                "plc_host": "plc-train",
                "train_coil": 101,
            },
        ],
        "profiles": [
            {
                "name": "corp-mail",
                "actor": "staff04",
                "kind": "SEND_EMAIL",
                "start_us": d1(7, 30),
                "period_us": _hms(4),
                "params": {"to": "staff03", "subject": "shift report", "body": "all quiet"},
            },
            {
                "name": "vendor-portal",
                "actor": "staff04",
                "kind": "BROWSE",
                "start_us": d1(6, 45),
                "period_us": _hms(6),
                "params": {"target": "hacker-web", "path": "/"},
            },
            {
                "name": "maint-cron",
                "actor": "maint-ws",
                "kind": "RUN_COMMAND",
                "start_us": d1(0, 20),
                "period_us": _hms(2),
                "params": {"argv": "uptime"},
            },
        ],
        "timeline": [
            {
                "step_label": "AS1-step-1:tool1",
                "at_us": d1(8, 10),
                "actor": "staff04",
                "kind": "BROWSE",
                "params": {
                    "target": "hacker-web",
                    "path": "/tools/updateInstaller.exe",
                    "save_as": f"C:\\Users\\staff04\\Downloads\\{TROJAN_AS1_NAME}",
                },
            },
            {
                "step_label": "AS1-step-1:tool2",
                "at_us": d1(8, 11),
                "actor": "staff04",
                "kind": "BROWSE",
                "params": {
                    "target": "hacker-web",
                    "path": "/tools/fciModule.bin",
                    "save_as": "C:\\Users\\staff04\\Downloads\\fciModule.bin",
                },
            },
            {
                "step_label": "AS1-step-2",
                "at_us": d1(8, 25),
                "actor": "staff04",
                "kind": "SEND_EMAIL",
                "params": {
                    "to": "staff03",
                    "subject": "Railworks update installer",
                    "attach_path": f"C:\\Users\\staff04\\Downloads\\{TROJAN_AS1_NAME}",
                },
            },
            {
                "step_label": "AS1-step-3:whoami",
                "at_us": d1(8, 50),
                "actor": "c2-server",
                "kind": "C2_TASK",
                "params": {
                    "victim": "staff03",
                    "command": "whoami",
                    "desc": "identity check on the phished workstation",
                },
            },
            {
                "step_label": "AS1-step-3:find",
                "at_us": d1(8, 52),
                "actor": "c2-server",
                "kind": "C2_TASK",
                "params": {
                    "victim": "staff03",
                    "command": "find credentials",
                    "desc": "filesystem sweep for credential material",
                },
            },
            {
                "step_label": "AS1-step-4:creds",
                "at_us": d1(9, 30),
                "actor": "c2-server",
                "kind": "C2_TASK",
                "params": {
                    "victim": "staff03",
                    "command": "cat credentials.txt",
                    "desc": "exfiltration of the maintenance jump credential",
                },
            },
            {
                "step_label": "AS1-step-4:keylog",
                "at_us": d1(9, 33),
                "actor": "c2-server",
                "kind": "C2_TASK",
                "params": {
                    "victim": "staff03",
                    "command": "keylog 4096",
                    "desc": "keystroke log upload",
                },
            },
            {
                "step_label": "AS1-step-4:screens",
                "at_us": d1(9, 36),
                "actor": "c2-server",
                "kind": "C2_TASK",
                "params": {
                    "victim": "staff03",
                    "command": "screenshot",
                    "desc": "screen capture upload",
                },
            },
            {
                "step_label": "AS1-step-5:drop",
                "at_us": d2(9, 40),
                "actor": "c2-server",
                "kind": "C2_TASK",
                "params": {
                    "victim": "staff03",
                    "drop": {"path": FCI_DROP_PATH, "content": {"builder": "fcimodule"}},
                    "desc": "FCI attack module staged on the workstation",
                },
            },
            {
                "step_label": "AS1-step-5:copy",
                "at_us": d2(9, 45),
                "actor": "staff03",
                "kind": "REMOTE_COPY",
                "params": {
                    "target": "maint-ws",
                    "via_implant": "staff03",
                    "src_path": FCI_DROP_PATH,
                    "dst_path": FCI_TOOL_PATH,
                    "cred_ref": "loot:staff03:cat credentials.txt",
                },
            },
            {
                "step_label": "AS1-step-6",
                "at_us": d2(9, 50),
                "actor": "staff03",
                "kind": "REMOTE_EXEC",
                "params": {
                    "target": "maint-ws",
                    "via_implant": "staff03",
                    "cmd": f"{FCI_TOOL_PATH} --quiet",
                    "cred_ref": "loot:staff03:cat credentials.txt",
                },
            },
            {
                "step_label": "AS1-step-7:recon",
                "at_us": d2(10, 0),
                "actor": "maint-ws",
                "kind": "FCI_RUN",
                "params": {"host": "maint-ws", "phase": "recon", "qty": 80},
            },
            {
                "step_label": "AS1-step-7:targets",
                "at_us": d2(10, 2),
                "actor": "c2-server",
                "kind": "C2_TASK",
                "params": {
                    "victim": "maint-ws",
                    "command": "targets weline01 avoid=100 cutoff=101",
                    "desc": "coil targets resolved for the traction cutoff",
                },
            },
            {
                "step_label": "AS1-step-8",
                "at_us": d2(10, 40),
                "actor": "maint-ws",
                "kind": "FCI_RUN",
                "params": {"host": "maint-ws", "phase": "flood", "duration_s": 90, "period_ms": 500},
            },
        ],
        "milestones": [
            {
                "step_label": "AS1-step-1",
                "deadline_us": d1(8, 30),
                "observe": [{"event": "payload_downloaded", "subject": "staff04", "count": 2}],
            },
            {
                "step_label": "AS1-step-2",
                "deadline_us": d1(9, 0),
                "observe": [{"event": "implant_active", "subject": "staff03"}],
            },
            {
                "step_label": "AS1-step-3",
                "deadline_us": d1(9, 10),
                "observe": [{"event": "c2_first_frame", "subject": "staff03"}],
            },
            {
                "step_label": "AS1-step-4",
                "deadline_us": d1(10, 30),
                "observe": [
                    {
                        "event": "c2_result",
                        "subject": "staff03",
                        "detail_contains": "cat credentials.txt",
                    }
                ],
            },
            {
                "step_label": "AS1-step-5",
                "deadline_us": d2(9, 55),
                "observe": [
                    {"event": "c2_drop", "subject": "staff03", "detail_contains": "fciModule"},
                    {"event": "scp_file", "subject": "maint-ws", "detail_contains": "fciModule"},
                ],
            },
            {
                "step_label": "AS1-step-6",
                "deadline_us": d2(9, 58),
                "observe": [{"event": "fci_active", "subject": "maint-ws"}],
            },
            {
                "step_label": "AS1-step-7",
                "deadline_us": d2(10, 30),
                "observe": [
                    {"event": "fci_recon", "subject": "maint-ws"},
                    {"event": "fci_telemetry_sent", "subject": "maint-ws"},
                    {"event": "fci_targets_resolved", "subject": "maint-ws"},
                ],
            },
            {
                "step_label": "AS1-step-8",
                "deadline_us": d2(10, 45),
                "observe": [
                    {"event": "fci_flood_started", "subject": "maint-ws"},
                    {"event": "avoidance_disable", "subject": "train-plc"},
                ],
            },
            {
                "step_label": "AS1-step-9",
                "deadline_us": d2(10, 50),
                "observe": [
                    {"event": "TRACTION_CUT", "subject": "weline01"},
                    {"event": "COLLISION", "detail_contains": "weline01"},
                ],
            },
        ],
        "evidence": {
            "pcaps": [
                {"name": "router", "vantage": "router-all"},
                {"name": "firewall", "vantage": "segment:external"},
            ],
            "memory_hosts": ["staff03", "maint-ws"],
            "memory_at_us": d2(11, 0),
            "disk_hosts": ["maint-ws"],
            "disk_at_us": d2(11, 0),
        },
        "outcome": {"name": "COLLISION", "event": "COLLISION", "subject_contains": "weline01"},
    }


# ---------------------------------------------------------------------------
# AS2: power false-data injection -> grid outage
# ---------------------------------------------------------------------------


def _as2_office_hosts(with_attackers: bool) -> list:
    secrets_ini = (
        "[sync]\n"
        f"ftp-srv ftp: {SHARE_FTP_CRED}\n"
        "[mail]\n"
        "relay = 10.27.34.2\n"
    )
    credentials_note = (
        "# jump boxes\n"
        f"scada-ws ssh: {SCADA_SSH_CRED}\n"
        "badge door: 4410\n"
    )
    hosts = [
        {
            "name": "ext-client",
            "segment": "external",
            "ip": "203.0.113.20",
        },
        {
            "name": "webapp",
            "segment": "corp",
            "ip": "10.27.34.20",
            "os": "linux",
            "services": [
                {
                    "kind": "web",
                    "params": {
                        "routes": {
                            "/": {"text": "<html>Rail Operator Portal</html>"},
                            "/news": {"text": "<html>Service notices</html>"},
                            "/portal": {"text": "<html>Staff portal</html>"},
                        }
                    },
                }
            ],
            "files": [
                {"path": "/srv/webapp/config/secrets.ini", "content": {"text": secrets_ini}},
                {
                    "path": "/srv/webapp/config/app.ini",
                    "content": {"text": "[app]\nworkers = 4\n"},
                },
            ],
        },
        {
            "name": "ftp-srv",
            "segment": "corp",
            "ip": "10.27.34.21",
            "os": "linux",
            "credentials": [{"service": "ftp", "value": SHARE_FTP_CRED}],
            "services": [{"kind": "ftp"}],
            "files": [
                {
                    "path": "/srv/ftp/share/timetable_2024.pdf",
                    "content": {"blob": "timetable", "size": 18_000},
                },
                {
                    "path": "/srv/ftp/share/depot_rota.xlsx",
                    "content": {"blob": "rota", "size": 9_000},
                },
            ],
        },
        {
            "name": "staff01",
            "segment": "corp",
            "ip": "10.27.34.5",
            "auto_run_downloads": True,
        },
        {
            "name": "staff03",
            "segment": "corp",
            "ip": "10.27.34.10",
            "tags": ["it-engineer"],
            "auto_run_downloads": True,
            "files": [
                {
                    "path": "C:\\Users\\staff03\\Documents\\credentials.txt",
                    "content": {"text": credentials_note},
                }
            ],
        },
        {
            "name": "scada-ws",
            "segment": "hq-ops",
            "ip": "10.27.34.131",
            "os": "linux",
            "credentials": [{"service": "ssh", "value": SCADA_SSH_CRED}],
            "services": [{"kind": "ssh"}],
        },
        {"name": "hmi-console", "segment": "hq-ops", "ip": "10.27.34.132"},
        {"name": "ops-console", "segment": "hq-ops", "ip": "10.27.34.133"},
        {"name": "grid-plc", "segment": "engineering", "ip": "10.27.34.193", "os": "controller"},
        {"name": "rtu-power", "segment": "engineering", "ip": "10.27.34.194", "os": "controller"},
        {"name": "power-link", "segment": "engineering", "ip": "10.27.34.196", "os": "controller"},
        {"name": "grid-sim", "segment": "physical", "ip": "10.27.35.10", "os": "linux"},
        {"name": "rail-sim", "segment": "physical", "ip": "10.27.35.11", "os": "linux"},
    ]
    if with_attackers:
        hosts[0:0] = [
            {
                "name": "hacker-web",
                "segment": "external",
                "ip": "203.0.113.50",
                "os": "linux",
            },
            {
                "name": "c2-server",
                "segment": "external",
                "ip": "203.0.113.80",
                "os": "linux",
                "services": [{"kind": "c2"}],
            },
        ]
    return hosts


_AS2_SEGMENTS = [
    {"name": "external", "cidr": "203.0.113.0/24"},
    {"name": "corp", "cidr": "10.27.34.0/26"},
    {"name": "hq-ops", "cidr": "10.27.34.128/26"},
    {"name": "engineering", "cidr": "10.27.34.192/26"},
    {"name": "physical", "cidr": "10.27.35.0/26"},
]

_AS2_RULES = [
    {"action": "ALLOW", "src": "external", "dst": "corp"},
    {"action": "ALLOW", "src": "corp", "dst": "external"},
    {"action": "ALLOW", "src": "corp", "dst": "hq-ops", "port": 22},
    {"action": "ALLOW", "src": "hq-ops", "dst": "corp"},
    {"action": "ALLOW", "src": "hq-ops", "dst": "engineering", "port": 502},
    {"action": "ALLOW", "src": "hq-ops", "dst": "engineering", "port": 102},
    {"action": "ALLOW", "src": "engineering", "dst": "hq-ops"},
    {"action": "ALLOW", "src": "physical", "dst": "engineering"},
    {"action": "ALLOW", "src": "engineering", "dst": "physical"},
]


def _as2_devices() -> list:
    return [
        {
            "name": "grid-plc",
            "kind": "grid_plc",
            "host": "grid-plc",
            "params": {"scan_period_us": 100_000},
        },
        {
            "name": "rtu-power",
            "kind": "rtu",
            "host": "rtu-power",
            "params": {"poll_period_us": 1 * US},
        },
        {
            "name": "hmi",
            "kind": "hmi",
            "host": "hmi-console",
            "params": {
                "client_port": 47010,
                "rtu_host": "rtu-power",
                "grid_plc_host": "grid-plc",
                "poll_period_us": 1 * US,
                "start_offset_us": 100_000,
            },
        },
        _console("ops-grid-console", "ops-console", 47001, "grid-plc", 5, 500, _REGISTER_READS),
        {
            "name": "grid-cover",
            "kind": "cover",
            "host": "grid-sim",
            "params": {
                "target_host": "power-link",
                "feed": "grid",
                "period_us": 5 * US,
                "start_offset_us": 300_000,
            },
        },
        {
            "name": "rail-cover",
            "kind": "cover",
            "host": "rail-sim",
            "params": {
                "target_host": "power-link",
                "feed": "rail",
                "period_us": 5 * US,
                "start_offset_us": 700_000,
            },
        },
    ]


def _as2_document() -> dict:
    def at(h, m=0, s=0):
        return _hms(h - 8, m, s)

    return {
        "schema_version": "1",
        "name": "as2",
        "title": "Power service false-data injection",
        "epoch": "2024-04-10T08:00:00Z",
        "duration_us": 8 * _hms(1),
        "seed": 42,
        "segments": _AS2_SEGMENTS,
        "hosts": _as2_office_hosts(with_attackers=True),
        "rules": _AS2_RULES,
        "layout": _rail_layout(),
        "devices": _as2_devices(),
        "activations": [
            {
                "host": "staff01",
                "kind": "spytrojan",
                "activate_label": "AS2-step-3",
                "beacon_label": "AS2-step-4:staff01",
                "c2_host": "c2-server",
            },
            {
                "host": "staff03",
                "kind": "spytrojan",
                "activate_label": "AS2-step-5:implant",
                "beacon_label": "AS2-step-4:staff03",
                "c2_host": "c2-server",
            },
            {
                "host": "scada-ws",
                "kind": "s7fdi",
                "activate_label": "AS2-step-7:exec",
                "rtu_host": "rtu-power",
            },
        ],
        "profiles": [
            {
                "name": "staff01-share-sync",
                "actor": "staff01",
                "kind": "FILE_SHARE_SYNC",
                "start_us": at(8, 10),
                "period_us": 1800 * US,
                "params": {"server": "ftp-srv"},
            },
            {
                "name": "staff03-share-sync",
                "actor": "staff03",
                "kind": "FILE_SHARE_SYNC",
                "start_us": at(8, 40),
                "period_us": 2700 * US,
                "params": {"server": "ftp-srv"},
            },
            {
                "name": "public-browsing",
                "actor": "ext-client",
                "kind": "BROWSE",
                "start_us": at(8, 2),
                "period_us": 300 * US,
                "params": {"target": "webapp", "path": "/news"},
            },
            {
                "name": "staff-portal",
                "actor": "staff01",
                "kind": "BROWSE",
                "start_us": at(8, 5),
                "period_us": 600 * US,
                "params": {"target": "webapp", "path": "/portal"},
            },
            {
                "name": "staff03-cron",
                "actor": "staff03",
                "kind": "RUN_COMMAND",
                "start_us": at(8, 15),
                "period_us": 3600 * US,
                "params": {"argv": "uptime"},
            },
        ],
        "timeline": [
            {
                "step_label": "AS2-step-1:upload",
                "at_us": at(9, 12),
                "actor": "hacker-web",
                "kind": "UPLOAD_FILE",
                "params": {
                    "target": "webapp",
                    "filename": "image.txt",
                    "content": {"builder": "webshell", "encode": "b64"},
                },
            },
            {
                "step_label": "AS2-step-1:cmd-id",
                "at_us": at(9, 14),
                "actor": "hacker-web",
                "kind": "WEBSHELL_EXEC",
                "params": {"target": "webapp", "shell_path": "/uploads/image.txt", "cmd": "id"},
            },
            {
                "step_label": "AS2-step-1:cmd-ls",
                "at_us": at(9, 16),
                "actor": "hacker-web",
                "kind": "WEBSHELL_EXEC",
                "params": {
                    "target": "webapp",
                    "shell_path": "/uploads/image.txt",
                    "cmd": "ls /srv/webapp/config",
                },
            },
            {
                "step_label": "AS2-step-1:cmd-secrets",
                "at_us": at(9, 18),
                "actor": "hacker-web",
                "kind": "WEBSHELL_EXEC",
                "params": {
                    "target": "webapp",
                    "shell_path": "/uploads/image.txt",
                    "cmd": "cat /srv/webapp/config/secrets.ini",
                    "collect_as": "ftp-cred",
                },
            },
            {
                "step_label": "AS2-step-1:cmd-whoami",
                "at_us": at(9, 20),
                "actor": "hacker-web",
                "kind": "WEBSHELL_EXEC",
                "params": {"target": "webapp", "shell_path": "/uploads/image.txt", "cmd": "whoami"},
            },
            {
                "step_label": "AS2-step-1:cmd-cleanup",
                "at_us": at(9, 22),
                "actor": "hacker-web",
                "kind": "WEBSHELL_EXEC",
                "params": {
                    "target": "webapp",
                    "shell_path": "/uploads/image.txt",
                    "cmd": "ls /srv/webapp/uploads",
                },
            },
            {
                "step_label": "AS2-step-2",
                "at_us": at(9, 30),
                "actor": "hacker-web",
                "kind": "FTP_STOR",
                "params": {
                    "server": "ftp-srv",
                    "filename": TROJAN_AS2_NAME,
                    "content": {"builder": "spytrojan", "display_name": TROJAN_AS2_NAME},
                    "cred_ref": "actor:ftp-cred",
                },
            },
            {
                "step_label": "AS2-step-5:scan",
                "at_us": at(10, 15),
                "actor": "c2-server",
                "kind": "C2_TASK",
                "params": {
                    "victim": "staff01",
                    "command": "scan hq-ops",
                    "desc": "service sweep of the operations segment",
                },
            },
            {
                "step_label": "AS2-step-5:keylog",
                "at_us": at(10, 16),
                "actor": "c2-server",
                "kind": "C2_TASK",
                "params": {
                    "victim": "staff01",
                    "command": "keylog 4096",
                    "desc": "keystroke log upload",
                },
            },
            {
                "step_label": "AS2-step-5:screens",
                "at_us": at(10, 17),
                "actor": "c2-server",
                "kind": "C2_TASK",
                "params": {
                    "victim": "staff01",
                    "command": "screenshot",
                    "desc": "screen capture upload",
                },
            },
            {
                "step_label": "AS2-step-5:find",
                "at_us": at(10, 18),
                "actor": "c2-server",
                "kind": "C2_TASK",
                "params": {
                    "victim": "staff03",
                    "command": "find credentials",
                    "desc": "filesystem sweep for credential material",
                },
            },
            {
                "step_label": "AS2-step-5:creds",
                "at_us": at(10, 19),
                "actor": "c2-server",
                "kind": "C2_TASK",
                "params": {
                    "victim": "staff03",
                    "command": "cat credentials.txt",
                    "desc": "exfiltration of the SCADA jump credential",
                },
            },
            {
                "step_label": "AS2-step-6",
                "at_us": at(10, 30),
                "actor": "c2-server",
                "kind": "C2_TASK",
                "params": {
                    "victim": "staff03",
                    "drop": {
                        "path": FDI_DROP_PATH,
                        "content": {
                            "builder": "s7fdi",
                            "rtu_host": "rtu-power",
                            "values": [990, 410],
                        },
                    },
                    "desc": "telemetry override script staged on the workstation",
                },
            },
            {
                "step_label": "AS2-step-7:copy",
                "at_us": at(10, 45),
                "actor": "staff03",
                "kind": "REMOTE_COPY",
                "params": {
                    "target": "scada-ws",
                    "via_implant": "staff03",
                    "src_path": FDI_DROP_PATH,
                    "dst_path": FDI_TOOL_PATH,
                    "cred_ref": "loot:staff03:cat credentials.txt",
                },
            },
            {
                "step_label": "AS2-step-7:exec",
                "at_us": at(10, 50),
                "actor": "staff03",
                "kind": "REMOTE_EXEC",
                "params": {
                    "target": "scada-ws",
                    "via_implant": "staff03",
                    "cmd": f"python3 {FDI_TOOL_PATH}",
                    "cred_ref": "loot:staff03:cat credentials.txt",
                },
            },
            {
                "step_label": "AS2-step-8",
                "at_us": at(11, 0),
                "actor": "scada-ws",
                "kind": "FDI_RUN",
                "params": {
                    "host": "scada-ws",
                    "duration_s": 90,
                    "period_ms": 200,
                    "values": [990, 410],
                },
            },
        ],
        "milestones": [
            {
                "step_label": "AS2-step-1",
                "deadline_us": at(9, 25),
                "observe": [
                    {"event": "webshell_installed", "subject": "webapp"},
                    {"event": "webshell_exec", "subject": "webapp", "count": 5},
                ],
            },
            {
                "step_label": "AS2-step-2",
                "deadline_us": at(9, 35),
                "observe": [
                    {
                        "event": "ftp_stor",
                        "subject": "ftp-srv",
                        "detail_contains": TROJAN_AS2_NAME,
                    }
                ],
            },
            {
                "step_label": "AS2-step-3",
                "deadline_us": at(9, 50),
                "observe": [
                    {"event": "share_exec", "subject": "staff01"},
                    {"event": "implant_active", "subject": "staff01"},
                ],
            },
            {
                "step_label": "AS2-step-4",
                "deadline_us": at(10, 0),
                "observe": [{"event": "c2_beacon_seen", "subject": "staff01"}],
            },
            {
                "step_label": "AS2-step-5",
                "deadline_us": at(10, 25),
                "observe": [
                    {"event": "implant_active", "subject": "staff03"},
                    {"event": "c2_result", "subject": "staff01", "detail_contains": "scan"},
                    {
                        "event": "c2_result",
                        "subject": "staff03",
                        "detail_contains": "cat credentials.txt",
                    },
                ],
            },
            {
                "step_label": "AS2-step-6",
                "deadline_us": at(10, 40),
                "observe": [
                    {"event": "c2_drop", "subject": "staff03", "detail_contains": "powercheck"}
                ],
            },
            {
                "step_label": "AS2-step-7",
                "deadline_us": at(10, 55),
                "observe": [
                    {"event": "lateral_copy", "subject": "staff03", "detail_contains": "scada-ws"},
                    {"event": "fdi_active", "subject": "scada-ws"},
                ],
            },
            {
                "step_label": "AS2-step-8",
                "deadline_us": at(11, 5),
                "observe": [
                    {"event": "fdi_started", "subject": "scada-ws"},
                    {"event": "s7_write", "subject": "rtu-power", "detail_contains": "990"},
                ],
            },
            {
                "step_label": "AS2-step-9",
                "deadline_us": at(11, 6),
                "observe": [
                    {"event": "alert_raised", "subject": "hmi", "detail_contains": "voltage=990"}
                ],
            },
            {
                "step_label": "AS2-step-10",
                "deadline_us": at(11, 7),
                "observe": [{"event": "auto_halted", "subject": "hmi"}],
            },
            {
                "step_label": "AS2-step-11",
                "deadline_us": at(11, 8),
                "observe": [
                    {"event": "breaker_cmd", "subject": "grid-plc", "detail_contains": "closed=False"},
                    {"event": "BREAKER_OPENED", "subject": "substation"},
                ],
            },
            {
                "step_label": "AS2-step-12",
                "deadline_us": at(11, 10),
                "observe": [
                    {"event": "POWER_LOST"},
                    {"event": "BREAKER_OPENED", "detail_contains": "power_w=0"},
                ],
            },
        ],
        "evidence": {
            "pcaps": [{"name": "router", "vantage": "router-all"}],
            "memory_hosts": ["staff01", "staff03"],
            "memory_at_us": at(12, 0),
            "log_names": ["web.log"],
            "key_log": True,
        },
        "outcome": {
            "name": "POWER_ZERO",
            "event": "BREAKER_OPENED",
            "subject_contains": "power_w=0",
        },
    }


# ---------------------------------------------------------------------------
# Benign control
# ---------------------------------------------------------------------------


def _benign_document() -> dict:
    return {
        "schema_version": "1",
        "name": "benign",
        "title": "Benign operations control run",
        "epoch": "2024-04-17T08:00:00Z",
        "duration_us": 1800 * US,
        "seed": 42,
        "segments": _AS2_SEGMENTS,
        "hosts": _as2_office_hosts(with_attackers=False),
        "rules": _AS2_RULES,
        "layout": _rail_layout(),
        "devices": _as2_devices(),
        "profiles": [
            {
                "name": "staff01-share-sync",
                "actor": "staff01",
                "kind": "FILE_SHARE_SYNC",
                "start_us": 300 * US,
                "period_us": 600 * US,
                "params": {"server": "ftp-srv"},
            },
            {
                "name": "staff03-share-sync",
                "actor": "staff03",
                "kind": "FILE_SHARE_SYNC",
                "start_us": 420 * US,
                "period_us": 600 * US,
                "params": {"server": "ftp-srv"},
            },
            {
                "name": "public-browsing",
                "actor": "ext-client",
                "kind": "BROWSE",
                "start_us": 30 * US,
                "period_us": 120 * US,
                "params": {"target": "webapp", "path": "/news"},
            },
            {
                "name": "staff-portal",
                "actor": "staff01",
                "kind": "BROWSE",
                "start_us": 60 * US,
                "period_us": 180 * US,
                "params": {"target": "webapp", "path": "/portal"},
            },
            {
                "name": "staff03-cron",
                "actor": "staff03",
                "kind": "RUN_COMMAND",
                "start_us": 200 * US,
                "period_us": 900 * US,
                "params": {"argv": "uptime"},
            },
        ],
        "evidence": {
            "pcaps": [{"name": "router", "vantage": "router-all"}],
            "memory_hosts": ["staff01"],
            "memory_at_us": 1500 * US,
            "log_names": ["web.log"],
        },
    }


# ---------------------------------------------------------------------------
# Access
# ---------------------------------------------------------------------------

_DOCUMENT_BUILDERS = {
    "as1": _as1_document,
    "as2": _as2_document,
    "benign": _benign_document,
}


def builtin_document(name: str) -> dict:
    """The raw JSON document for a builtin (what load_spec consumes).

    Always a fresh deep copy: callers may freely mutate the document (the
    tests build broken variants this way) without touching shared state.
    """
    try:
        builder = _DOCUMENT_BUILDERS[name]
    except KeyError:
        raise SchemaError(
            f"unknown scenario {name!r}; builtins are {', '.join(sorted(_DOCUMENT_BUILDERS))}"
        ) from None
    return copy.deepcopy(builder())


def get_builtin(name: str) -> ScenarioSpec:
    return load_spec(builtin_document(name))


def builtin_as1() -> ScenarioSpec:
    return get_builtin("as1")


def builtin_as2() -> ScenarioSpec:
    return get_builtin("as2")


def builtin_benign() -> ScenarioSpec:
    return get_builtin("benign")
