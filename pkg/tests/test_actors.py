"""Services, implants and the C2 loop.

Frozen expectations: implant pid 8340 for (seed=42, host=staff01); backoff
ladder 30/60/120/240/300s; beacon wire layout checked against an independent
base64 construction.  File contents, loot round-trips, and auth denials are
asserted directly.
"""

from __future__ import annotations

import base64
from datetime import datetime, timezone

import pytest

from railrange.actors import (
    ActivationPlan,
    AnnounceService,
    C2Server,
    EmailService,
    FtpService,
    ImplantLabels,
    SshService,
    WebAppService,
    detect_malware,
    fci_binary,
    fdi_script,
    make_binary_activator,
    parse_credential,
    perform_action,
    trojan_binary,
    webshell_script,
)
from railrange.errors import PreconditionNotMet
from railrange.hosts import Host
from railrange.otdevices import COIL_AVOIDANCE, COIL_CUTOFF_BASE, Rtu, TrainControlPlc
from railrange.physics import LayoutSpec, TrackSpec, TrainSpec, World
from railrange.runtime import Ctx, EventHub, GroundTruth, KeyChain, PlanView
from railrange.simnet import BLOCKED, EventLoop, Fabric

EPOCH = datetime(2024, 4, 3, 8, 0, 0, tzinfo=timezone.utc)
SEC = 1_000_000


def make_ctx(seed=42, scenario_id="lab", deny_c2=False):
    loop = EventLoop(EPOCH)
    fabric = Fabric(loop)
    fabric.add_segment("corp", "10.27.34.0/26")
    fabric.add_segment("maintenance", "10.27.34.64/26")
    fabric.add_segment("engineering", "10.27.34.192/26")
    fabric.add_segment("external", "203.0.113.0/24")
    if deny_c2:
        fabric.add_rule("DENY", "corp", "external", 443)
    for src, dst, port in [
        ("corp", "external", None),
        ("external", "corp", None),
        ("corp", "maintenance", 22),
        ("maintenance", "corp", None),
        ("maintenance", "external", 443),
        ("external", "maintenance", None),
        ("maintenance", "engineering", 502),
        ("maintenance", "engineering", 102),
        ("engineering", "maintenance", None),
    ]:
        fabric.add_rule("ALLOW", src, dst, port)

    specs = [
        ("staff01", "corp", "10.27.34.5", "windows", dict(execute_email_attachments=True, auto_run_downloads=True, tags=("staff",))),
        ("staff03", "corp", "10.27.34.10", "windows", dict(auto_run_downloads=True, tags=("it-engineer",))),
        ("staff04", "corp", "10.27.34.11", "windows", dict(tags=("staff",))),
        ("webapp", "corp", "10.27.34.20", "linux", {}),
        ("ftp", "corp", "10.27.34.21", "linux", {}),
        ("maint-ws", "maintenance", "10.27.34.85", "linux", {}),
        ("plc-train", "engineering", "10.27.34.193", "controller", {}),
        ("rtu-power", "engineering", "10.27.34.194", "controller", {}),
        ("c2-server", "external", "203.0.113.80", "linux", {}),
        ("hacker-web", "external", "203.0.113.50", "linux", {}),
    ]
    hosts = {}
    for name, seg, ip, os_label, extra in specs:
        fabric.attach_host(name, seg, ip)
        host = Host(name, ip, seg, os_label=os_label, seed=seed, **extra)
        host.boot(0)
        hosts[name] = host

    plan = PlanView(
        memory_hosts={"staff01", "staff03", "maint-ws"},
        disk_hosts={"staff01", "staff03", "maint-ws", "webapp"},
        log_names={"web.log"},
        frame_visible=lambda frame, outcome: True,
    )
    truth = GroundTruth(plan, loop)
    ctx = Ctx(
        loop=loop,
        fabric=fabric,
        hosts=hosts,
        keychain=KeyChain(seed, scenario_id),
        truth=truth,
        hub=EventHub(loop),
        seed=seed,
        scenario_id=scenario_id,
    )
    labels = ImplantLabels(activate="AS1-step-2", beacon="AS1-step-3")
    plans = {
        ("staff01", "spytrojan"): ActivationPlan(kind="spytrojan", labels=labels, c2_host="c2-server"),
        ("staff03", "spytrojan"): ActivationPlan(kind="spytrojan", labels=labels, c2_host="c2-server"),
        ("maint-ws", "fcimodule"): ActivationPlan(
            kind="fcimodule", labels=ImplantLabels(activate="AS1-step-6", beacon="AS1-step-6"),
            c2_host="c2-server", plc_host="plc-train", train_coil=COIL_CUTOFF_BASE,
        ),
        ("maint-ws", "s7fdi"): ActivationPlan(
            kind="s7fdi", labels=ImplantLabels(activate="AS2-step-7", beacon="AS2-step-7"),
            rtu_host="rtu-power",
        ),
    }
    ctx.activate_binary = make_binary_activator(ctx, plans)

    c2 = C2Server(ctx, "c2-server")
    c2.start()
    ctx.registry["c2"] = c2
    for name in ("staff01", "staff03", "staff04"):
        EmailService(ctx, name).start()
        AnnounceService(ctx, name).start()
    SshService(ctx, "maint-ws").start()
    hosts["maint-ws"].credentials["ssh"] = "maint:Tr4ckFix!2024"
    return ctx, c2


def plant_trojan(ctx, host_name="staff03"):
    """Drop + activate the implant directly (no delivery chain)."""
    host = ctx.host(host_name)
    path = f"C:\\Users\\{host_name}\\Downloads\\updateInstaller.exe"
    host.write_file(ctx.loop.now, path, trojan_binary(ctx.seed, "updateInstaller.exe"),
                    origin="malicious")
    ctx.activate_binary(host_name, path, "explorer.exe")
    return ctx.registry[f"trojan:{host_name}"]


# ---------------------------------------------------------------------------
# Markers and helpers
# ---------------------------------------------------------------------------


def test_marker_detection():
    assert detect_malware(trojan_binary(42, "a.exe")) == "spytrojan"
    assert detect_malware(fci_binary(42)) == "fcimodule"
    assert detect_malware(fdi_script("10.27.34.194", (990, 410))) == "s7fdi"
    assert detect_malware(b"plain text file") is None
    assert detect_malware(webshell_script()) is None  # web-side, not a host implant


def test_parse_credential():
    text = "# notes\nmaint-ws ssh: maint:Tr4ckFix!2024\nwebmail: staff03:Spring2024!\n"
    assert parse_credential(text, "maint-ws") == "maint:Tr4ckFix!2024"
    assert parse_credential(text, "scada-ws") is None


# ---------------------------------------------------------------------------
# Implant activation and identity
# ---------------------------------------------------------------------------


def test_implant_pid_staff01_is_8340():
    # stable pid oracle for (seed=42, "staff01")
    ctx, _ = make_ctx()
    trojan = plant_trojan(ctx, "staff01")
    assert trojan.proc.pid == 8340
    assert trojan.proc.name == "updateInstaller.exe"
    assert "keylogger.dll" in trojan.proc.loaded_modules
    helper_pids = [p.pid for p in ctx.host("staff01").running_processes() if p.name == "updhelper.exe"]
    assert helper_pids and helper_pids[0] != trojan.proc.pid


def test_activation_records_memory_and_disk_truth():
    ctx, _ = make_ctx()
    plant_trojan(ctx, "staff03")
    classes = [(e.cls, e.locator.get("field")) for e in ctx.truth.entries]
    assert ("MEMORY", "process") in classes
    assert ("MEMORY", "socket") in classes
    assert any(e.cls == "FILESYSTEM" and "updateInstaller" in e.locator["path"] for e in ctx.truth.entries)


def test_email_attachment_executes_on_trusting_host():
    ctx, _ = make_ctx()
    sender = ctx.host("staff04")
    path = "C:\\Users\\staff04\\Downloads\\updateInstaller.exe"
    sender.write_file(0, path, trojan_binary(ctx.seed, "updateInstaller.exe"), origin="malicious")
    perform_action(
        ctx, "staff04", "SEND_EMAIL",
        {"to": "staff01", "subject": "urgent update", "attach_path": path},
        origin="malicious", step="AS1-step-2",
    )
    ctx.loop.step_until(400 * SEC)
    assert f"trojan:staff01" in ctx.registry  # opened ~300s after delivery
    assert ctx.host("staff01").has_file("C:\\Users\\staff01\\Downloads\\updateInstaller.exe")
    # the phishing frame itself was cataloged
    assert any(e.cls == "NETWORK" and "phishing" in e.description for e in ctx.truth.entries)


# ---------------------------------------------------------------------------
# C2 loop
# ---------------------------------------------------------------------------


def test_beacon_task_result_round_trip_cat_credentials():
    ctx, c2 = make_ctx()
    victim = ctx.host("staff03")
    victim.write_file(0, "C:\\Users\\staff03\\Documents\\credentials.txt",
                      b"# personal notes\nmaint-ws ssh: maint:Tr4ckFix!2024\n")
    plant_trojan(ctx, "staff03")
    c2.queue_task("staff03", "cat credentials.txt", step="AS1-step-4", desc="credential theft")
    ctx.loop.step_until(40 * SEC)
    loot = c2.loot_text("staff03", "cat credentials.txt")
    assert loot is not None and b"Tr4ckFix!2024" in loot
    # the wire request for that task is the documented base64 form
    encoded = base64.b64encode(b"cat credentials.txt").decode()
    assert encoded == "Y2F0IGNyZWRlbnRpYWxzLnR4dA=="


def test_beacons_are_periodic_and_sealed():
    ctx, _ = make_ctx()
    seen = []
    ctx.fabric.frame_listeners.append(
        lambda fr, oc: seen.append(fr) if fr.dst_port == 443 else None
    )
    plant_trojan(ctx, "staff03")
    ctx.loop.step_until(100 * SEC)
    beacons = [f for f in seen if f.payload.startswith(b"SEAL")]
    assert len(beacons) == 4  # t=+5, +35, +65, +95
    gaps = {beacons[i + 1].ts - beacons[i].ts for i in range(len(beacons) - 1)}
    assert gaps == {30 * SEC}
    assert all(b"/api/task" not in f.payload for f in beacons)  # content is sealed


def test_beacon_backoff_doubles_when_blocked():
    ctx, _ = make_ctx(deny_c2=True)
    seen = []
    ctx.fabric.frame_listeners.append(
        lambda fr, oc: seen.append((fr.ts, oc)) if fr.dst_port == 443 else None
    )
    plant_trojan(ctx, "staff03")
    ctx.loop.step_until(1400 * SEC)
    assert all(oc == BLOCKED for _, oc in seen)
    gaps = [(b - a) // SEC for (a, _), (b, _) in zip(seen, seen[1:])]
    # doubling from the 30s base, capped at 300s
    assert gaps == [60, 120, 240, 300, 300, 300]


def test_keylog_and_chunked_screenshot_exfil():
    ctx, c2 = make_ctx()
    plant_trojan(ctx, "staff03")
    c2.queue_task("staff03", "keylog 4096", step="AS1-step-4:keylog", desc="keystroke log")
    c2.queue_task("staff03", "screenshot 122880", step="AS1-step-4:screens", desc="screen captures")
    ctx.loop.step_until(120 * SEC)
    keylog = c2.loot_text("staff03", "keylog 4096")
    shot = c2.loot_text("staff03", "screenshot 122880")
    assert keylog is not None and len(keylog) == 4096 and keylog.isascii()
    assert shot is not None and len(shot) == 122880 and shot.startswith(b"\x89PNG")
    # three result chunks collapse to one catalog entry with count=3
    chunked = [e for e in ctx.truth.entries if "screenshot" in e.description and e.cls == "NETWORK"]
    assert len(chunked) == 1 and chunked[0].count == 3


def test_scan_task_reports_ssh_banner_and_roles():
    ctx, c2 = make_ctx()
    plant_trojan(ctx, "staff03")
    c2.queue_task("staff03", "scan corp", step="AS1-step-3:scan", desc="segment sweep")
    c2.queue_task("staff03", "scan maintenance", step="AS1-step-3:scan2", desc="ot sweep")
    ctx.loop.step_until(120 * SEC)
    corp = c2.loot_text("staff03", "scan corp")
    maint = c2.loot_text("staff03", "scan maintenance")
    assert corp is not None and b"HOST staff01 ROLE staff" in corp
    assert maint is not None and b"SSH-2.0-rrsim maint-ws" in maint
    scans = [e for e in ctx.truth.entries if "scan probe" in e.description]
    assert len(scans) == 2  # one aggregated loop entry per scan command
    assert all(e.count > 1 for e in scans)


# ---------------------------------------------------------------------------
# Web app, uploads, web shell
# ---------------------------------------------------------------------------


def web_rig(ctx):
    app = WebAppService(ctx, "webapp", routes={"/index.html": b"<html>portal</html>"})
    app.start()
    ctx.host("webapp").write_file(0, "/srv/webapp/config/secrets.ini",
                                  b"[ftp]\nftp ftp: ftpsvc:Sh4re2024\n")
    return app


def test_webapp_upload_installs_webshell_and_logs_verbatim():
    ctx, _ = make_ctx()
    app = web_rig(ctx)
    payload_b64 = base64.b64encode(webshell_script()).decode()
    ta = ctx.host("c2-server")
    ta.write_file(0, "/home/ta/image.txt", payload_b64.encode())
    perform_action(
        ctx, "c2-server", "UPLOAD_FILE",
        {"target": "webapp", "filename": "image.txt", "content_path": "/home/ta/image.txt"},
        origin="malicious", step="AS2-step-1",
    )
    ctx.loop.step_until(2 * SEC)
    assert "/uploads/image.txt" in app.webshells
    upload_lines = [l for l in app.log_lines if " UPLOAD image.txt " in l]
    assert len(upload_lines) == 1
    # the logged body decodes to the script itself (verbatim capture)
    body = upload_lines[0].split(" UPLOAD image.txt ", 1)[1]
    assert base64.b64decode(body) == webshell_script()
    assert any(e.cls == "LOG" for e in ctx.truth.entries)


def test_webshell_executes_commands_and_actor_collects():
    ctx, _ = make_ctx()
    app = web_rig(ctx)
    payload_b64 = base64.b64encode(webshell_script()).decode()
    ctx.host("c2-server").write_file(0, "/home/ta/image.txt", payload_b64.encode())
    perform_action(
        ctx, "c2-server", "UPLOAD_FILE",
        {"target": "webapp", "filename": "image.txt", "content_path": "/home/ta/image.txt"},
        origin="malicious", step="AS2-step-1",
    )
    ctx.loop.step_until(2 * SEC)
    perform_action(
        ctx, "c2-server", "WEBSHELL_EXEC",
        {"target": "webapp", "shell_path": "/uploads/image.txt",
         "cmd": "cat /srv/webapp/config/secrets.ini", "collect_as": "webapp-secrets"},
        origin="malicious", step="AS2-step-1:read",
    )
    ctx.loop.step_until(4 * SEC)
    blob = ctx.registry["actor_loot"]["webapp-secrets"]
    assert b"ftpsvc:Sh4re2024" in blob
    # the command rides in the URL as base64 and lands in the access log
    encoded = base64.b64encode(b"cat /srv/webapp/config/secrets.ini").decode()
    assert any(f"cmd={encoded}" in l for l in app.log_lines)


def test_plain_browse_is_served_and_not_cataloged():
    ctx, _ = make_ctx()
    web_rig(ctx)
    perform_action(ctx, "staff04", "BROWSE", {"target": "webapp", "path": "/index.html"})
    ctx.loop.step_until(2 * SEC)
    assert not any(e.cls == "NETWORK" for e in ctx.truth.entries)


# ---------------------------------------------------------------------------
# FTP share
# ---------------------------------------------------------------------------


def test_ftp_stor_requires_credential_and_sync_infects():
    ctx, _ = make_ctx()
    ftp_host = ctx.host("ftp")
    ftp_host.credentials["ftp"] = "ftpsvc:Sh4re2024"
    ftp_host.write_file(0, "/srv/ftp/share/minutes.txt", b"meeting minutes")
    FtpService(ctx, "ftp").start()

    # wrong credential is refused
    ctx.fabric.send(
        "c2-server", "ftp", 40000, 21,
        b"USER ftpsvc PASS wrong STOR evil.exe\r\n" + base64.b64encode(b"x"),
        origin="malicious",
    )
    ctx.loop.step_until(1 * SEC)
    assert not ftp_host.has_file("/srv/ftp/share/evil.exe")

    # right credential stores the trojan on the share
    blob = base64.b64encode(trojan_binary(ctx.seed, "ZoomMeetingSetup.exe")).decode()
    ctx.fabric.send(
        "c2-server", "ftp", 40001, 21,
        f"USER ftpsvc PASS Sh4re2024 STOR ZoomMeetingSetup.exe\r\n{blob}".encode(),
        origin="malicious",
    )
    ctx.loop.step_until(2 * SEC)
    entry = ftp_host.fs.get("/srv/ftp/share/ZoomMeetingSetup.exe")
    assert entry is not None and entry.origin == "malicious"

    # a syncing workstation that auto-runs new programs gets infected
    perform_action(ctx, "staff01", "FILE_SHARE_SYNC", {"server": "ftp"})
    ctx.loop.step_until(4 * SEC)
    host = ctx.host("staff01")
    assert host.has_file("C:\\Users\\staff01\\Share\\minutes.txt")
    assert "trojan:staff01" in ctx.registry
    assert ctx.registry["trojan:staff01"].proc.pid == 8340  # oracle

    # second sync is a no-op (already mirrored)
    before = len(host.fs)
    perform_action(ctx, "staff01", "FILE_SHARE_SYNC", {"server": "ftp"})
    ctx.loop.step_until(6 * SEC)
    assert len(host.fs) == before


# ---------------------------------------------------------------------------
# SSH sealed sessions
# ---------------------------------------------------------------------------


def test_ssh_rejects_wrong_credential():
    ctx, _ = make_ctx()
    plant_trojan(ctx, "staff03")
    trojan = ctx.registry["trojan:staff03"]
    trojan.remote_copy("maint-ws", "maint:WRONG", "C:\\Users\\staff03\\Downloads\\updateInstaller.exe",
                       "/opt/maint/x", step="AS1-step-5")
    ctx.loop.step_until(2 * SEC)
    assert not ctx.host("maint-ws").has_file("/opt/maint/x")
    assert any(k == "ssh_auth_fail" for _, k, _, _ in ctx.hub.history)


def test_ssh_scp_and_exec_activate_fci_module():
    ctx, c2 = make_ctx()
    victim = ctx.host("staff03")
    victim.write_file(0, "C:\\Users\\staff03\\Documents\\credentials.txt",
                      b"maint-ws ssh: maint:Tr4ckFix!2024\n")
    victim.write_file(0, "C:\\Users\\staff03\\Downloads\\fciModule", fci_binary(ctx.seed),
                      origin="malicious")
    plant_trojan(ctx, "staff03")
    c2.queue_task("staff03", "cat credentials.txt", step="AS1-step-4", desc="creds")
    ctx.loop.step_until(40 * SEC)

    trojan = ctx.registry["trojan:staff03"]
    cred = trojan.resolve_loot_credential("staff03", "cat credentials.txt", "maint-ws")
    assert cred == "maint:Tr4ckFix!2024"
    trojan.remote_copy("maint-ws", cred, "C:\\Users\\staff03\\Downloads\\fciModule",
                       "/opt/maint/fciModule", step="AS1-step-5")
    ctx.loop.step_until(42 * SEC)
    assert ctx.host("maint-ws").fs["/opt/maint/fciModule"].origin == "malicious"

    trojan.remote_exec("maint-ws", cred, "/opt/maint/fciModule", step="AS1-step-6")
    ctx.loop.step_until(44 * SEC)
    fci = ctx.registry.get("fci:maint-ws")
    assert fci is not None
    assert fci.proc.name == "fciModule.exe"
    assert "libmbtcp.so" in fci.proc.loaded_modules
    # parent chain: module under a live shell under sshd
    host = ctx.host("maint-ws")
    shell = host.procs[fci.proc.ppid]
    assert shell.running and host.procs[shell.ppid].name == "sshd"


def test_missing_loot_raises_precondition():
    ctx, _ = make_ctx()
    plant_trojan(ctx, "staff03")
    trojan = ctx.registry["trojan:staff03"]
    with pytest.raises(PreconditionNotMet):
        trojan.resolve_loot_credential("staff03", "cat credentials.txt", "maint-ws")


# ---------------------------------------------------------------------------
# OT attack tools
# ---------------------------------------------------------------------------


def ot_world(ctx):
    layout = LayoutSpec(tracks=(TrackSpec(id="T1", blocks=6),))
    trains = (
        TrainSpec(id="weline01", track="T1", block=0),
        TrainSpec(id="weline02", track="T1", block=3),
    )
    # external mode: the PLC is the collision-avoidance layer
    return World(layout, trains, avoidance="external", clock=lambda: ctx.loop.now)


def test_fci_recon_targets_and_flood():
    ctx, c2 = make_ctx()
    world = ot_world(ctx)
    plc = TrainControlPlc(
        "plc-train", "plc-train", ctx.fabric, ctx.loop, world,
        scan_period_us=1_000_000, train_ids=["weline01", "weline02"],
    )
    plc.start()
    host = ctx.host("maint-ws")
    host.write_file(0, "/opt/maint/fciModule", fci_binary(ctx.seed), origin="malicious")
    ctx.activate_binary("maint-ws", "/opt/maint/fciModule", "sshd")
    fci = ctx.registry["fci:maint-ws"]

    fci.run_recon("AS1-step-7", qty=16)
    ctx.loop.step_until(5 * SEC)
    telemetry = c2.loot_text("maint-ws", "fci telemetry")
    assert telemetry is not None and b"ReadBitsResponse" in telemetry

    c2.queue_task("maint-ws", "targets weline01 avoid=100 cutoff=101",
                  step="AS1-step-7:targets", desc="target params")
    ctx.loop.step_until(75 * SEC)  # next fci beacon is at +70s
    targets = host.read_file("/opt/maint/fci_targets.json")
    assert targets is not None and b'"train": "weline01"' in targets

    # drive the world alongside a 3-second flood
    def world_tick():
        world.step(1.0)
        ctx.loop.schedule_in(1_000_000, world_tick)
    ctx.loop.schedule_at(ctx.loop.now, world_tick)

    fci.run_flood("AS1-step-8", duration_s=3, period_ms=500)
    ctx.loop.step_until(85 * SEC)
    assert world.trains["weline01"].cutoff is True
    assert plc.image.coils[COIL_AVOIDANCE] is False
    floods = [e for e in ctx.truth.entries if "write flood" in e.description]
    assert len(floods) == 2  # avoidance + cutoff loops, aggregated
    assert all(e.count >= 5 for e in floods)


def test_fdi_script_overwrites_rtu_registers():
    ctx, _ = make_ctx()
    world = ot_world(ctx)
    rtu = Rtu("rtu-power", "rtu-power", ctx.fabric, ctx.loop, world, poll_period_us=1_000_000)
    rtu.start()
    host = ctx.host("maint-ws")
    path = "/home/op/s7_fdi.py"
    host.write_file(0, path, fdi_script("10.27.34.194", (990, 410)), origin="malicious")
    ctx.activate_binary("maint-ws", path, "sshd")
    fdi = ctx.registry["fdi:maint-ws"]

    fdi.run("AS2-step-8", duration_s=3, period_ms=200, values=(990, 410))
    ctx.loop.step_until(3 * SEC)
    assert rtu.image.input_regs[0] == 990 and rtu.image.input_regs[1] == 410
    loops = [e for e in ctx.truth.entries if "false telemetry" in e.description]
    assert len(loops) == 1 and loops[0].count >= 10
    ctx.loop.step_until(10 * SEC)
    # flood over: the poll refreshes from the true meter again
    assert rtu.image.input_regs[0] == 750


def test_run_command_via_ssh_exec_python_script():
    ctx, _ = make_ctx()
    host = ctx.host("maint-ws")
    path = "/home/op/s7_fdi.py"
    host.write_file(0, path, fdi_script("10.27.34.194", (990, 410)), origin="malicious")
    plant_trojan(ctx, "staff03")
    trojan = ctx.registry["trojan:staff03"]
    trojan.remote_exec("maint-ws", "maint:Tr4ckFix!2024", f"python3 {path}", step="AS2-step-7")
    ctx.loop.step_until(2 * SEC)
    fdi = ctx.registry.get("fdi:maint-ws")
    assert fdi is not None and fdi.proc.name == "python3"
